import { ApiClient } from "./api.js";
import { App } from "./app.js";

function need(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id} in the page shell`);
  return el;
}

const app = new App(new ApiClient(""), {
  heatmap: need("heatmap"),
  expansion: need("expansion"),
  decision: need("decision"),
  upset: need("upset"),
  valueMap: need("value-map"),
  agent: need("agent"),
  targetInfo: need("target-info"),
  timeline: need("timeline"),
  controls: need("controls"),
  notice: need("notice"),
  sessionBar: need("session-bar"),
  pager: need("pager"),
});

void app.start();

"""Shared builders: small datasets, a GDC-scale schema, and the synthetic
matching tasks used by the acceptance suite."""

from __future__ import annotations

import io
import csv
import json
import random

from matchkit.core import SourceDataset, TargetSchema, ingest_source, parse_target_schema


def csv_bytes(columns: dict[str, list[str | None]]) -> bytes:
    names = list(columns)
    n_rows = max((len(v) for v in columns.values()), default=0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for i in range(n_rows):
        writer.writerow([columns[name][i] if i < len(columns[name]) else "" for name in names])
    return buf.getvalue().encode("utf-8")


def make_dataset(columns: dict[str, list[str | None]], name: str = "source") -> SourceDataset:
    return ingest_source(csv_bytes(columns), name)


def schema_bytes(attrs: list[dict]) -> bytes:
    return json.dumps(attrs).encode("utf-8")


def make_schema(attrs: list[dict], name: str = "target") -> TargetSchema:
    return parse_target_schema(schema_bytes(attrs), name)


_SUPERCATEGORIES = {
    "clinical": ["demographic", "diagnosis", "treatment", "exposure", "follow_up"],
    "biospecimen": ["sample", "aliquot", "analyte", "portion"],
    "molecular": ["variant", "expression", "copy_number"],
}

_WORDS = [
    "age", "index", "stage", "tumor", "grade", "site", "primary", "diagnosis",
    "days", "birth", "death", "vital", "status", "gender", "race", "ethnicity",
    "smoking", "alcohol", "exposure", "pack", "years", "treatment", "therapy",
    "dose", "agent", "outcome", "response", "sample", "type", "tissue", "code",
    "weight", "height", "bmi", "count", "percent", "method", "lymph", "node",
    "margin", "laterality", "morphology", "histology", "icd", "system", "prior",
    "year", "progression", "recurrence", "marker", "level", "result", "value",
]


def gdc_style_schema_attrs(n: int, seed: int = 7) -> list[dict]:
    """A deterministic hierarchy of n attributes shaped like a biomedical
    data-commons dictionary."""
    rng = random.Random(seed)
    supers = list(_SUPERCATEGORIES)
    attrs: list[dict] = []
    seen: set[str] = set()
    while len(attrs) < n:
        sc = supers[len(attrs) % len(supers)]
        cat = _SUPERCATEGORIES[sc][len(attrs) % len(_SUPERCATEGORIES[sc])]
        words = rng.sample(_WORDS, rng.randint(2, 3))
        name = "_".join(words)
        if name in seen:
            name = f"{name}_{len(attrs)}"
        seen.add(name)
        kind = rng.random()
        attr: dict = {
            "name": name,
            "supercategory": sc,
            "category": cat,
            "description": f"The {' '.join(words)} recorded for the case.",
        }
        if kind < 0.4:
            attr["value_type"] = "enumeration"
            pool = rng.sample(_WORDS, 4)
            attr["enum_values"] = [w.title() for w in pool]
        elif kind < 0.7:
            attr["value_type"] = "integer"
        else:
            attr["value_type"] = "text"
        attrs.append(attr)
    return attrs


def gdc_style_schema(n: int = 479, seed: int = 7) -> TargetSchema:
    return make_schema(gdc_style_schema_attrs(n, seed), name="gdc_style")


def eighteen_column_source(seed: int = 11) -> SourceDataset:
    """An 18-attribute source table in the same vocabulary as the schema."""
    rng = random.Random(seed)
    columns: dict[str, list[str | None]] = {}
    for i in range(18):
        words = rng.sample(_WORDS, 2)
        name = "_".join(words) + (f"_{i}" if i % 3 == 0 else "")
        values = [str(rng.randint(0, 80)) for _ in range(24)]
        columns[name] = values
    return make_dataset(columns, name="study")


# ---------------------------------------------------------------------------
# Synthetic matching tasks with planted ground truth
# ---------------------------------------------------------------------------

_VALUE_POOLS = [
    ["IA", "IB", "IIA", "IIB", "IIIA", "IIIB", "IV"],
    ["Positive", "Negative", "Equivocal", "Unknown"],
    ["Alive", "Dead", "Lost to Follow-up"],
    ["Male", "Female"],
    ["Current", "Former", "Never"],
    ["Complete Response", "Partial Response", "Stable Disease", "Progressive Disease"],
    ["Left", "Right", "Bilateral"],
    ["Primary", "Metastatic", "Recurrent"],
]

_ABBREV = {
    "diagnosis": "dx", "treatment": "tx", "history": "hx", "primary": "prim",
    "response": "resp", "percent": "pct", "number": "num", "status": "stat",
    "sample": "samp", "tumor": "tum", "index": "idx", "grade": "grd",
}

_SYNONYMS = {
    "gender": "sex", "tumor": "neoplasm", "site": "location", "stage": "phase",
    "outcome": "result", "death": "decease", "smoking": "tobacco", "dose": "amount",
    "type": "kind", "method": "procedure", "weight": "mass", "count": "total",
}


def _perturb_name(name: str, mode: str, rng: random.Random) -> str:
    tokens = name.split("_")
    if mode == "exact":
        return name
    if mode == "case":
        return " ".join(t.title() for t in tokens)
    if mode == "abbrev":
        return "_".join(_ABBREV.get(t, t[: max(3, len(t) - 2)]) for t in tokens)
    if mode == "reorder":
        shuffled = list(tokens)
        rng.shuffle(shuffled)
        return "_".join(shuffled) + "_flag"
    if mode == "synonym":
        return "_".join(_SYNONYMS.get(t, t) for t in tokens)
    if mode == "rename":
        # Unrelated name: only values can identify the correspondence.
        return "col_" + "".join(rng.choice("abcdefgh") for _ in range(6))
    raise ValueError(mode)


def _perturb_values(values: list[str], mode: str, rng: random.Random) -> list[str]:
    if mode == "same":
        return list(values)
    if mode == "subset":
        keep = max(2, int(len(values) * 0.7))
        return [rng.choice(values[:keep]) for _ in values]
    if mode == "prefixed":
        return [f"Stage {v}" if not v.replace(".", "").isdigit() else v for v in values]
    if mode == "noisy":
        out = []
        for v in values:
            if rng.random() < 0.25:
                out.append(v.lower() + rng.choice(["", " ", "?"]))
            else:
                out.append(v)
        return out
    if mode == "recoded":
        # Re-encode every distinct value so no character evidence survives.
        codebook: dict[str, str] = {}
        out = []
        for v in values:
            if v not in codebook:
                if v.isdigit():
                    codebook[v] = str(int(v) * 10 + 70001)
                else:
                    codebook[v] = f"Q{len(codebook) + 1:02d}"
            out.append(codebook[v])
        return out
    raise ValueError(mode)


def make_synthetic_task(task_seed: int, n_targets: int = 140, n_sources: int = 20):
    """One planted-truth matching task.

    Returns (source_dataset, target_schema, truth_pairs). Different
    perturbation classes are distributed across source attributes so that no
    single matcher sees an easy task everywhere.
    """
    rng = random.Random(task_seed)
    n_rows = 40
    # A narrow vocabulary makes target names share tokens, so candidates are
    # genuinely confusable rather than trivially separable.
    vocabulary = rng.sample(_WORDS, 24)

    target_columns: dict[str, list[str]] = {}
    seen: set[str] = set()
    while len(target_columns) < n_targets:
        words = rng.sample(vocabulary, rng.randint(2, 3))
        name = "_".join(words)
        if name in seen:
            continue
        seen.add(name)
        style = rng.random()
        if style < 0.5:
            pool = rng.choice(_VALUE_POOLS)
            values = [rng.choice(pool) for _ in range(n_rows)]
        elif style < 0.8:
            base = rng.randint(0, 200)
            values = [str(base + rng.randint(0, 60)) for _ in range(n_rows)]
        else:
            values = [f"{rng.choice(words)}_{rng.randint(1, 9)}" for _ in range(n_rows)]
        target_columns[name] = values

    target_names = list(target_columns)
    picked = rng.sample(target_names, n_sources)
    # Each class defeats a different matcher; no single method sees an easy
    # task everywhere, which is what makes the ensemble comparison meaningful.
    classes = [
        ("case", "recoded"),      # names survive, values re-encoded
        ("exact", "recoded"),
        ("abbrev", "same"),       # values survive, names abbreviated
        ("rename", "same"),       # values only
        ("reorder", "recoded"),   # token overlap only
        ("synonym", "noisy"),
        ("abbrev", "recoded"),    # name edit distance only
        ("reorder", "prefixed"),
        ("synonym", "subset"),
        ("case", "prefixed"),
    ]

    source_columns: dict[str, list[str]] = {}
    truth: list[tuple[str, str]] = []
    for i, t_name in enumerate(picked):
        name_mode, value_mode = classes[i % len(classes)]
        s_name = _perturb_name(t_name, name_mode, rng)
        if s_name in source_columns or s_name == t_name and name_mode != "exact":
            s_name = f"{s_name}_{i}"
        s_values = _perturb_values(target_columns[t_name], value_mode, rng)
        source_columns[s_name] = s_values
        truth.append((s_name, t_name))

    for i in range(3):  # distractors with no counterpart
        source_columns[f"note_free_text_{i}"] = [
            "lorem ipsum " + "".join(rng.choice("xyzw") for _ in range(5)) for _ in range(n_rows)
        ]

    source = make_dataset(source_columns, name=f"task{task_seed}_source")
    target = parse_target_schema(csv_bytes(target_columns), name=f"task{task_seed}_target")
    return source, target, truth

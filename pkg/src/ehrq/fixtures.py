"""Seeded synthetic hospital data in the nine-table and five-table shapes.

Both shapes hold the same facts: the five-table one merges patients into
admissions and folds each code/item table into its event table.
"""
from __future__ import annotations

import csv
import io
import json
import random
from importlib import resources
from pathlib import Path

from .relational import Database, database_from_rows
from .schema import SchemaManifest, manifest_from_json
from .transpile import ColumnMapping, QueryTemplate, template_from_json

NINE_TABLE = "nine_table"
FIVE_TABLE = "five_table"
SHAPES = (NINE_TABLE, FIVE_TABLE)

FIRST_NAMES = ["mary", "james", "linda", "robert", "susan", "michael", "karen", "david",
               "nancy", "joseph", "betty", "thomas", "helen", "charles", "sandra", "daniel"]
LAST_NAMES = ["smith", "johnson", "garcia", "miller", "davis", "lopez", "wilson", "moore",
              "taylor", "thomas", "jackson", "white", "harris", "martin", "clark", "lewis"]
GENDERS = ["f", "m"]
ETHNICITIES = ["white", "black/african american", "hispanic or latino", "asian",
               "unknown/not specified"]
ADMISSION_TYPES = ["emergency", "elective", "urgent", "newborn"]
ADMISSION_LOCATIONS = ["emergency room admit", "phys referral/normal deli",
                       "clinic referral/premature", "transfer from hosp/extram"]
INSURANCES = ["medicare", "medicaid", "private", "government", "self pay"]
MARITAL = ["married", "single", "widowed", "divorced"]

DIAGNOSES = [
    ("4019", "hypertension nos", "unspecified essential hypertension"),
    ("4280", "chf nos", "congestive heart failure, unspecified"),
    ("42731", "atrial fibrillation", "atrial fibrillation"),
    ("5849", "acute kidney failure nos", "acute kidney failure, unspecified"),
    ("25000", "dmii wo cmp nt st uncntr", "diabetes mellitus without mention of complication"),
    ("2724", "hyperlipidemia nec/nos", "other and unspecified hyperlipidemia"),
    ("51881", "acute respiratry failure", "acute respiratory failure"),
    ("0389", "septicemia nos", "unspecified septicemia"),
]
PROCEDURES = [
    ("3893", "venous cath nec", "venous catheterization, not elsewhere classified"),
    ("9604", "insert endotracheal tube", "insertion of endotracheal tube"),
    ("9671", "cont inv mec ven <96 hrs", "continuous invasive mechanical ventilation"),
    ("3995", "hemodialysis", "hemodialysis"),
    ("9915", "parent infus nutrit sub", "parenteral infusion of concentrated nutrition"),
    ("3722", "left heart cardiac cath", "left heart cardiac catheterization"),
]
DRUGS = [
    ("antihypertensive", "main", "po", "antih10"),
    ("heparin sodium", "main", "sc", "hepa5i"),
    ("potassium chloride", "main", "iv", "kcl20"),
    ("insulin glargine", "main", "sc", "glar100"),
    ("sodium chloride 0.9% flush", "base", "iv", "nacl0.9"),
    ("metoprolol tartrate", "main", "po", "meto25"),
    ("acetaminophen", "main", "po", "acet325"),
    ("vancomycin", "additive", "iv", "vanc1f"),
]
LAB_ITEMS = [
    (50912, "creatinine", "blood", "chemistry", (0.4, 4.0)),
    (50971, "potassium", "blood", "chemistry", (2.5, 6.5)),
    (51222, "hemoglobin", "blood", "hematology", (6.0, 17.0)),
    (51301, "white blood cells", "blood", "hematology", (2.0, 25.0)),
    (50931, "glucose", "blood", "chemistry", (50.0, 400.0)),
    (51491, "ph", "urine", "hematology", (4.5, 8.5)),
]
MAX_EVENTS = 5


def _json(name: str):
    return json.loads(resources.files("ehrq").joinpath("data", name).read_text(encoding="utf-8"))


def fixture_manifest(shape: str = NINE_TABLE) -> SchemaManifest:
    _check_shape(shape)
    return manifest_from_json(_json(f"manifest_{shape}.json"))


def fixture_templates(shape: str = NINE_TABLE) -> list[QueryTemplate]:
    _check_shape(shape)
    return [template_from_json(e) for e in _json(f"templates_{shape}.json")]


def five_to_nine_mapping() -> ColumnMapping:
    return ColumnMapping.from_json(_json("mapping_five_to_nine.json"))


def _check_shape(shape: str) -> None:
    if shape not in SHAPES:
        raise ValueError(f"unknown fixture schema {shape!r}; expected one of {SHAPES}")


def generate_nine_table(n_patients: int, seed: int) -> dict[str, list[tuple]]:
    """Rows for the nine tables, aligned with the declared column order."""
    if n_patients < 1:
        raise ValueError("n_patients must be at least 1")
    rng = random.Random(seed)
    out = {name: [] for name in ("patients", "admissions", "diagnoses", "d_icd_diagnoses",
                                 "procedures", "d_icd_procedures", "prescriptions", "lab",
                                 "d_labitems")}
    hadm_id, diag_id, proc_id, lab_id = 100000, 1000, 5000, 20000
    for p in range(n_patients):
        subject_id = 10000 + p
        dob = rng.randint(1920, 2000)
        dead = rng.random() < 0.3
        dod = rng.randint(2100, 2150) if dead else None
        out["patients"].append((
            subject_id, f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}",
            rng.choice(GENDERS), dob, dod, int(dead), rng.choice(ETHNICITIES),
        ))
        for a in range(rng.randint(1, 3)):
            hadm_id += 1
            admityear = rng.randint(2100, 2150)
            out["admissions"].append((
                hadm_id, subject_id, rng.choice(ADMISSION_TYPES),
                rng.choice(ADMISSION_LOCATIONS), rng.choice(INSURANCES),
                rng.randint(18, 90), admityear, rng.randint(1, 40), rng.choice(MARITAL),
            ))
            # the very first admission carries every kind of event so the
            # deepest path exists even in a one-patient fixture
            first = p == 0 and a == 0
            lo = 1 if first else 0
            diag_ids = []
            for seq in range(1, rng.randint(lo, MAX_EVENTS) + 1):
                diag_id += 1
                diag_ids.append(diag_id)
                code, short, long_ = rng.choice(DIAGNOSES)
                out["diagnoses"].append((diag_id, hadm_id, seq))
                out["d_icd_diagnoses"].append((diag_id, code, short, long_))
            n_proc = rng.randint(lo, MAX_EVENTS) if diag_ids else 0
            for seq in range(1, n_proc + 1):
                proc_id += 1
                code, short, long_ = rng.choice(PROCEDURES)
                out["procedures"].append((proc_id, rng.choice(diag_ids), seq))
                out["d_icd_procedures"].append((proc_id, code, short, long_))
            for t in range(rng.randint(lo, MAX_EVENTS)):
                drug, dtype, route, code = rng.choice(DRUGS)
                out["prescriptions"].append((
                    hadm_id, drug, dtype, route, round(rng.uniform(0.5, 500.0), 1), code, t,
                ))
            for _ in range(rng.randint(lo, MAX_EVENTS)):
                lab_id += 1
                itemid, label, fluid, category, (vlo, vhi) = rng.choice(LAB_ITEMS)
                value = round(rng.uniform(vlo, vhi), 2)
                flag = "abnormal" if rng.random() < 0.35 else None
                out["lab"].append((lab_id, hadm_id, rng.randint(0, 240), value, flag))
                out["d_labitems"].append((lab_id, itemid, label, fluid, category))
    return out


def nine_to_five(rows: dict[str, list[tuple]]) -> dict[str, list[tuple]]:
    """The same facts in the merged five-table shape."""
    patients = {r[0]: r for r in rows["patients"]}
    demographic = []
    for hadm, subj, atype, aloc, ins, age, year, stay, marital in rows["admissions"]:
        _, name, gender, dob, dod, flag, eth = patients[subj]
        demographic.append((hadm, subj, name, gender, dob, dod, flag, eth, atype, aloc, ins,
                            age, year, stay, marital))
    diag_hadm = {d[0]: d[1] for d in rows["diagnoses"]}
    diag_seq = {d[0]: d[2] for d in rows["diagnoses"]}
    diagnoses = [(diag_hadm[i], diag_seq[i], code, short, long_)
                 for i, code, short, long_ in rows["d_icd_diagnoses"]]
    proc = {p[0]: p for p in rows["procedures"]}
    procedures = [(diag_hadm[proc[i][1]], proc[i][2], code, short, long_)
                  for i, code, short, long_ in rows["d_icd_procedures"]]
    labs = {r[0]: r for r in rows["lab"]}
    lab = [(labs[i][1], labs[i][2], labs[i][3], labs[i][4], itemid, label, fluid, category)
           for i, itemid, label, fluid, category in rows["d_labitems"]]
    return {"demographic": demographic, "diagnoses": diagnoses, "procedures": procedures,
            "prescriptions": list(rows["prescriptions"]), "lab": lab}


def fixture_rows(n_patients: int, seed: int, shape: str = NINE_TABLE):
    _check_shape(shape)
    rows = generate_nine_table(n_patients, seed)
    return rows if shape == NINE_TABLE else nine_to_five(rows)


def fixture_database(n_patients: int, seed: int, shape: str = NINE_TABLE) -> Database:
    return database_from_rows(fixture_manifest(shape), fixture_rows(n_patients, seed, shape))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else v for v in r])
    return buf.getvalue()


def gen_fixture(n_patients: int, seed: int, shape: str, out) -> list[Path]:
    """Write manifest.json, one CSV per table, templates.json (and, for the
    five-table shape, mapping.json onto the nine-table shape)."""
    manifest = fixture_manifest(shape)
    rows = fixture_rows(n_patients, seed, shape)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def write(name, text):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    write("manifest.json", json.dumps(manifest.to_json(), indent=2) + "\n")
    for spec in manifest.tables:
        write(f"{spec.name}.csv", _csv_text(spec.column_names, rows[spec.name]))
    write("templates.json", json.dumps(_json(f"templates_{shape}.json"), indent=2) + "\n")
    if shape == FIVE_TABLE:
        write("mapping.json", json.dumps(_json("mapping_five_to_nine.json"), indent=2) + "\n")
    return written

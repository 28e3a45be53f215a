import csv, json, sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from .models import Results, RunConfig
from .utils import jsonable

SCHEMA_VERSION = 1
REMINDER_CMD = "python -m mpelab.main verify-paper"
TABLE_COLUMNS = ("criterion", "expected", "actual", "tolerance", "status")


def build_document(cfg: RunConfig, digest: str, results) -> Dict:
    """Report envelope; generated_at is the only field that changes between identical runs."""
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": cfg.subcommand,
        "inputs_digest": digest,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.public_dict(),
        "results": jsonable(results),
    }


def write_json(doc: Dict, out_path: Optional[Path]) -> Optional[Path]:
    text = json.dumps(doc, indent=2, sort_keys=False)
    if out_path is None:
        sys.stdout.write(text + "\n")
        return None
    out_path.write_text(text + "\n", encoding="utf-8")
    return out_path


def write_csv(rows: List[Dict], out_path: Optional[Path]) -> Optional[Path]:
    """Plot-ready long-format rows; the header is taken from the first row."""
    if not rows:
        return None
    columns = list(rows[0].keys())
    clean = [{k: jsonable(v) for k, v in r.items()} for r in rows]
    if out_path is None:
        w = csv.DictWriter(sys.stdout, fieldnames=columns)
        w.writeheader()
        w.writerows(clean)
        return None
    with out_path.open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=columns)
        w.writeheader()
        w.writerows(clean)
    return out_path


def verification_rows(res: Results) -> List[Dict]:
    rows = [{"criterion": c.criterion, "group": c.group, "name": c.name, "expected": c.expected,
             "actual": c.actual, "tolerance": c.tolerance, "status": "PASS" if c.passed else "FAIL"}
            for c in res.checks]
    for cid, err in res.errors.items():
        rows.append({"criterion": cid, "group": "", "name": "error", "expected": "-",
                     "actual": err, "tolerance": "-", "status": "ERROR"})
    return sorted(rows, key=lambda r: r["criterion"])


def print_report(res: Results, cfg: RunConfig):
    rows = verification_rows(res)
    cells = [[f'{r["criterion"]:>2} {r["name"]}', r["expected"], r["actual"], r["tolerance"], r["status"]]
             for r in rows]
    widths = [max(len(h), *(len(str(c[i])) for c in cells)) if cells else len(h)
              for i, h in enumerate(TABLE_COLUMNS)]
    widths = [min(w, 60) for w in widths]
    line = lambda vals: " | ".join(str(v)[:w].ljust(w) for v, w in zip(vals, widths))

    print(f"\n=== Verification ({cfg.filter or 'all groups'}) ===")
    print(line(TABLE_COLUMNS))
    print("-+-".join("-" * w for w in widths))
    for c in cells:
        print(line(c))

    passed = sum(1 for c in res.checks if c.passed)
    print(f"\nChecks passed: {passed}/{len(res.checks)}")
    if res.errors:
        print("Criteria that raised:")
        for cid, err in res.errors.items():
            print(f"  - {cid}: {err}")

    t = res.timings
    print("\n=== Timing summary ===")
    for cid, secs in sorted(t.per_criterion.items()):
        print(f"Criterion {cid:>2}:  {secs:.2f}s")
    print(f"Total runtime: {t.total:.2f}s")

    if not res.passed:
        print("\nTip: rerun one group with --filter GROUP --verbose:")
        print(f"  {REMINDER_CMD} --filter mixing --verbose\n")


def print_summary(subcommand: str, payload: Dict, exit_code: int):
    """One-line status on stderr so stdout stays clean for JSON/CSV."""
    keys = [k for k in ("status", "lambda", "lambda0", "kind", "verdict", "passed") if k in payload]
    parts = [f"{k}={jsonable(payload[k])}" for k in keys]
    print(f"{subcommand}: {', '.join(parts) or 'done'} (exit {exit_code})", file=sys.stderr)

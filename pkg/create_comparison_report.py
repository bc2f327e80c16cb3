# -*- coding: utf-8 -*-
"""
Create HTML report comparing run results with the published reference scores
"""

import json
import sys
from pathlib import Path

from abrf import config
from abrf.experiment import condition_label
from abrf.tree import GrowthCondition

REFERENCE_FILE = Path(__file__).resolve().parent / "guidelines" / "reference_scores.json"


def load_reports(input_dir):
    """Every run report (*.json holding config/dataset/models) under input_dir."""
    reports = []
    for path in sorted(Path(input_dir).glob("**/*.json")):
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if isinstance(data, dict) and {"config", "dataset", "models"} <= set(data):
            reports.append(data)
    return reports


def load_references(path=REFERENCE_FILE):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)["tables"]


def find_reference(references, task, ensemble, condition, model, dataset):
    for table in references:
        if (table["task"], table["ensemble"], table["condition"], table["model"]) != (task, ensemble, condition, model):
            continue
        for row in table["rows"]:
            if row["dataset"].lower() == dataset.lower():
                return row
    return None


def comparison_rows(reports, references):
    """One row per run report: measured scores next to the reference ones."""
    rows = []
    for report in reports:
        cfg, ds = report["config"], report["dataset"]
        condition = condition_label(GrowthCondition.from_dict(cfg["condition"]))
        by_model = {m["model"]: m for m in report["models"]}
        model = cfg["model"]
        measured = by_model.get(model, by_model["baseline"])
        rows.append({
            "dataset": ds["name"],
            "task": ds["task"],
            "ensemble": cfg["ensemble"],
            "condition": condition,
            "model": model,
            "metric": measured["metric"],
            "eps_opt": measured["eps_opt"],
            "baseline": by_model["baseline"]["mean"],
            "softmax": by_model["softmax"]["mean"] if "softmax" in by_model else None,
            "score": measured["mean"],
            "std": measured["std"],
            "repetitions": measured["repetitions"],
            "reference": find_reference(references, ds["task"], cfg["ensemble"], condition, model, ds["name"]),
        })
    return sorted(rows, key=lambda r: (r["task"], r["ensemble"], r["condition"], r["model"], r["dataset"]))


def _num(value, digits=3):
    return "&ndash;" if value is None else f"{value:.{digits}f}"


def _cells(values):
    """Format a group of scores, highlighting the best."""
    present = [v for v in values if v is not None]
    best = max(present) if present else None
    return "".join(
        f"<td class='best'>{_num(v)}</td>" if v is not None and v == best else f"<td>{_num(v)}</td>"
        for v in values
    )


def render_html(rows, title="Attention-Based Random Forest Comparison"):
    improved = sum(1 for r in rows if r["softmax"] is not None and r["score"] > max(r["baseline"], r["softmax"]))
    html = f"""<!DOCTYPE html>
<html>
<head>
    <meta charset='UTF-8'>
    <title>{title}</title>
    <style>
        body {{ font-family: 'Segoe UI', Arial, sans-serif; margin: 20px; background-color: #f5f5f5; }}
        h1 {{ color: #2c3e50; margin-bottom: 5px; }}
        h2 {{ color: #34495e; margin-top: 0; font-size: 18px; font-weight: normal; }}
        .overview {{ background-color: white; padding: 20px; margin-bottom: 20px; border-radius: 5px; box-shadow: 0 2px 4px rgba(0,0,0,0.1); }}
        .stats-grid {{ display: grid; grid-template-columns: repeat(auto-fit, minmax(200px, 1fr)); gap: 15px; margin-top: 15px; }}
        .stat-box {{ background-color: #ecf0f1; padding: 15px; border-radius: 5px; text-align: center; }}
        .stat-value {{ font-size: 24px; font-weight: bold; color: #3498db; }}
        .stat-label {{ font-size: 12px; color: #7f8c8d; margin-top: 5px; }}
        table {{ border-collapse: collapse; width: 100%; background-color: white; box-shadow: 0 2px 4px rgba(0,0,0,0.1); }}
        th {{ background-color: #3498db; color: white; padding: 8px; font-size: 13px; }}
        th.reference {{ background-color: #7f8c8d; }}
        td {{ padding: 6px 8px; border-bottom: 1px solid #ddd; text-align: right; font-size: 13px; }}
        td.name {{ text-align: left; font-weight: bold; color: #2c3e50; }}
        td.best {{ font-weight: bold; color: #27ae60; }}
        .delta-pos {{ color: #27ae60; }}
        .delta-neg {{ color: #e74c3c; }}
    </style>
</head>
<body>
    <h1>{title}</h1>
    <h2>{len(rows)} runs | reference scores from {REFERENCE_FILE.name}</h2>

    <div class='overview'>
        <div class='stats-grid'>
            <div class='stat-box'>
                <div class='stat-value'>{len(rows)}</div>
                <div class='stat-label'>Runs</div>
            </div>
            <div class='stat-box'>
                <div class='stat-value'>{improved}</div>
                <div class='stat-label'>Model beats RF and Softmax</div>
            </div>
            <div class='stat-box'>
                <div class='stat-value'>{sum(1 for r in rows if r['reference'])}</div>
                <div class='stat-label'>Runs with a reference row</div>
            </div>
        </div>
    </div>

    <table>
        <tr>
            <th>Data set</th><th>Setting</th><th>Measure</th><th>&epsilon;<sub>opt</sub></th>
            <th>RF</th><th>Softmax</th><th>Model</th><th>Std</th>
            <th class='reference'>Ref &epsilon;</th><th class='reference'>Ref RF</th>
            <th class='reference'>Ref Softmax</th><th class='reference'>Ref Model</th><th>&Delta; Model</th>
        </tr>
"""
    for row in rows:
        ref = row["reference"] or {}
        setting = f"{row['model']} / {row['ensemble'].upper()} / cond {row['condition']}"
        if ref:
            delta = row["score"] - ref["model"]
            delta_cell = f"<td class='delta-{'pos' if delta >= 0 else 'neg'}'>{delta:+.3f}</td>"
        else:
            delta_cell = "<td>&ndash;</td>"
        html += (
            f"        <tr><td class='name'>{row['dataset']}</td><td>{setting}</td><td>{row['metric'].upper()}</td>"
            f"<td>{_num(row['eps_opt'])}</td>"
            f"{_cells([row['baseline'], row['softmax'], row['score']])}<td>{_num(row['std'])}</td>"
            f"<td>{_num(ref.get('eps_opt'))}</td>"
            f"{_cells([ref.get('baseline'), ref.get('softmax'), ref.get('model')])}"
            f"{delta_cell}</tr>\n"
        )
    html += """    </table>
</body>
</html>
"""
    return html


def create_report(input_dir=None, output_file=None):
    """Create the HTML comparison report from the run reports under input_dir."""
    input_dir = Path(input_dir or config.REPORTS_DIR)
    if not input_dir.exists():
        print(f"Error: {input_dir} not found")
        return None

    reports = load_reports(input_dir)
    if not reports:
        print(f"Error: no run reports under {input_dir}")
        return None

    rows = comparison_rows(reports, load_references())
    output_path = Path(output_file or input_dir / "comparison_report.html")
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "w", encoding="utf-8") as f:
        f.write(render_html(rows))

    print(f"✓ HTML report created: {output_path}")
    print(f"  {len(rows)} runs, {sum(1 for r in rows if r['reference'])} with reference scores")
    return output_path


if __name__ == "__main__":
    input_dir = sys.argv[1] if len(sys.argv) > 1 else None
    output_file = sys.argv[2] if len(sys.argv) > 2 else None
    create_report(input_dir, output_file)

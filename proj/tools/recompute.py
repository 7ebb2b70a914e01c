#!/usr/bin/env python3
"""Recomputes the recommended configuration of a results file from its per-metric cell scores.

Exit status is 0 when the recomputed choice and combined score agree with the
file's recommendation, 1 otherwise.
"""
import argparse
import json
import sys
from collections import defaultdict
from statistics import fmean

VIZ = {
    "data_fidelity", "field_similarity", "chart_type_similarity", "axis_accuracy",
    "filter_accuracy", "sort_accuracy", "encoding_accuracy", "interactivity_accuracy",
}
NL = {"factual_grounding", "assumptions_disclosure", "insightfulness", "coherence", "followup_relevance"}


def model_key(m):
    return f"{m['providerId']}/{m['modelId']}"


def cell_overall(scores, ids):
    values = [s["value"] for s in scores if s["status"] == "scored" and s["metricId"] in ids]
    return fmean(values) if values else None


def recompute(results):
    # config -> position (conversation, turn) -> list of per-run overall values
    viz = defaultdict(lambda: defaultdict(list))
    nl = defaultdict(lambda: defaultdict(list))
    for cell in results["cells"]:
        if cell["status"] != "done":
            continue
        config = (model_key(cell["model"]), cell["promptIndex"])
        position = (cell["conversationId"], cell["turnIndex"])
        v = cell_overall(cell.get("vizScores", []), VIZ)
        n = cell_overall(cell.get("nlScores", []), NL)
        if v is not None:
            viz[config][position].append(v)
        if n is not None:
            nl[config][position].append(n)

    def group_mean(by_position):
        means = [fmean(runs) for runs in by_position.values()]
        return fmean(means) if means else None

    order = [model_key(m) for m in results["config"]["models"]]
    rows = []
    for config in set(viz) | set(nl):
        v = group_mean(viz[config])
        n = group_mean(nl[config])
        combined = (v + n) / 2 if v is not None and n is not None else (v if v is not None else n)
        if combined is None:
            continue
        rows.append((config, combined, v if v is not None else float("-inf")))
    if not rows:
        return None
    rows.sort(key=lambda r: (-r[1], -r[2], order.index(r[0][0]), r[0][1]))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("results")
    parser.add_argument("--tolerance", type=float, default=1e-9)
    args = parser.parse_args()

    with open(args.results, encoding="utf-8") as f:
        results = json.load(f)
    rows = recompute(results)
    if rows is None:
        print("no completed cells")
        return 1
    for (model, prompt), combined, _ in rows:
        print(f"{model} p{prompt}\t{combined:.6f}")

    (best_model, best_prompt), best_combined, _ = rows[0]
    rec = (results.get("aggregate") or {}).get("recommendation")
    if rec is None:
        print("results carry no recommendation")
        return 1
    same = model_key(rec["model"]) == best_model and rec["promptIndex"] == best_prompt
    close = abs(rec["combined"] - best_combined) <= args.tolerance * max(1.0, abs(best_combined))
    print(f"recomputed: {best_model} p{best_prompt} ({best_combined:.6f}); "
          f"file: {model_key(rec['model'])} p{rec['promptIndex']} ({rec['combined']:.6f})")
    print("MATCH" if same and close else "MISMATCH")
    return 0 if same and close else 1


if __name__ == "__main__":
    sys.exit(main())

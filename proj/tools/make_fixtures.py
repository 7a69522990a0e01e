#!/usr/bin/env python3
"""Regenerates the synthetic fixtures under tests/fixtures/.

Everything is derived from fixed seeds, so rerunning reproduces the
checked-in files byte for byte.
"""

import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "tests" / "fixtures"

GUIDANCE = [2.5, 5.0, 7.5, 10.0, 12.5, 15.0]
ALPHAS = [0.3, 0.4, 0.5, 0.6, 0.7]
SEEDS = range(10)

LABELS = {
    "categories": {
        "duck": [
            {"id": 97, "name": "drake"},
            {"id": 98, "name": "red-breasted merganser, Mergus serrator"},
        ],
        "rabbit": [
            {"id": 330, "name": "wood rabbit, cottontail, cottontail rabbit"},
            {"id": 331, "name": "hare"},
            {"id": 332, "name": "Angora, Angora rabbit"},
        ],
        "elephant": [
            {"id": 385, "name": "Indian elephant, Elephas maximus"},
            {"id": 386, "name": "African elephant, Loxodonta africana"},
        ],
    }
}


def num(x):
    """Shortest round-trip text, matching the C++ writer (10.0 -> 10)."""
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def image_ref(pair, gs, alpha, seed):
    return f"{pair}_{num(gs)}_{num(alpha)}_{seed}.png"


def logistic(alpha, pse, beta):
    return 1.0 / (1.0 + math.exp(-beta * (alpha - pse)))


def split_mass(rng, total, n):
    """n non-negative shares of `total` with the given mean."""
    weights = [0.5 + rng.random() for _ in range(n)]
    s = sum(weights)
    return [total * n * w / s for w in weights]


def softmax_rows(rng, pair, models):
    rows = []
    for model, (pse, beta) in models.items():
        for gs in GUIDANCE:
            for alpha in ALPHAS:
                for seed in SEEDS:
                    p = logistic(alpha, pse + rng.gauss(0, 0.02), beta)
                    scale = 0.2 + 0.6 * rng.random()
                    mean_b = p * scale
                    mean_a = (1 - p) * scale
                    duck = split_mass(rng, mean_a, 2)
                    rabbit = split_mass(rng, mean_b, 3)
                    norm = max(1.0, max(duck + rabbit))
                    ref = image_ref(pair, gs, alpha, seed)
                    for label, prob in zip([97, 98], duck):
                        rows.append(f"{ref},{model},{label},{prob / norm:.9f}")
                    for label, prob in zip([330, 331, 332], rabbit):
                        rows.append(f"{ref},{model},{label},{prob / norm:.9f}")
    return rows


def human_log(rng):
    lines = ["#semprobe-trials v1 category_a=duck category_b=rabbit source=fixture",
             "observer_id,observer_kind,pair_id,alpha,guidance_scale,seed,response,"
             "reaction_time_ms,presented_at_iso8601,trial_index"]
    observers = {"h01": (0.48, 5.5, 0.0), "h02": (0.46, 6.5, 0.01), "h03": (0.50, 4.5, 0.05)}
    for obs, (pse, beta, outlier_rate) in observers.items():
        conditions = [(gs, a, s) for gs in GUIDANCE for a in ALPHAS for s in SEEDS]
        rng.shuffle(conditions)
        for index, (gs, alpha, seed) in enumerate(conditions):
            p = logistic(alpha, pse, beta)
            response = "rabbit" if rng.random() < p else "duck"
            rt = rng.lognormvariate(math.log(650), 0.35)
            if rng.random() < outlier_rate:
                rt = rng.choice([rng.uniform(40, 149), rng.uniform(5001, 9000)])
            minute, second = divmod(index * 2, 60)
            stamp = f"2025-03-01T10:{minute:02d}:{second:02d}.000Z"
            lines.append(f"{obs},human,duck-rabbit,{num(alpha)},{num(gs)},{seed},{response},"
                         f"{num(round(rt, 1))},{stamp},{index}")
    return lines


def manifest(pair, cat_a, cat_b):
    return {
        "manifest_id": f"{pair}-v1",
        "category_a": cat_a,
        "category_b": cat_b,
        "conditions": [
            {"pair_id": pair, "alpha": a, "guidance_scale": gs, "seed": s,
             "image_ref": image_ref(pair, gs, a, s)}
            for gs in GUIDANCE for a in ALPHAS for s in SEEDS
        ],
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240501)

    (OUT / "imagenet_labels.json").write_text(json.dumps(LABELS, indent=2) + "\n")

    rows = softmax_rows(rng, "duck-rabbit", {"synthetic-resnet": (0.40, 9.0),
                                             "synthetic-vit": (0.44, 12.0)})
    (OUT / "softmax_duck_rabbit.csv").write_text(
        "image_ref,model_id,label_id,probability\n" + "\n".join(rows) + "\n")

    wide = ["image_ref,model_id,97,98,330,331,332"]
    for seed in range(3):
        ref = image_ref("duck-rabbit", 7.5, 0.5, seed)
        probs = [rng.uniform(0, 0.3) for _ in range(5)]
        wide.append(f"{ref},synthetic-resnet," + ",".join(f"{p:.6f}" for p in probs))
    (OUT / "softmax_columnar.csv").write_text("\n".join(wide) + "\n")

    (OUT / "trials_humans.csv").write_text("\n".join(human_log(rng)) + "\n")

    for pair, a, b in [("duck-rabbit", "duck", "rabbit"), ("elephant-rabbit", "elephant", "rabbit")]:
        (OUT / f"manifest_{pair.replace('-', '_')}.json").write_text(
            json.dumps(manifest(pair, a, b), indent=2) + "\n")

    (OUT / "fit_config.toml").write_text(
        "# Defaults spelled out; see docs/formats.md\n"
        "[fit]\npse_min = 0\npse_max = 1\nbeta_min = 0.01\nbeta_max = 7.62\n"
        "lambda_mode = \"fixed\"\nlambda_fixed = 0\ngof_critical = 11.07\n"
        "[exclusion]\nfast_ms = 150\nslow_ms = 5000\nflag_fraction = 0.03\n")


if __name__ == "__main__":
    main()

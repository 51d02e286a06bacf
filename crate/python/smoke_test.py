"""Smoke test for the dynfit_py extension module."""

import json
import math
import tempfile
from pathlib import Path

import dynfit_py as df


def main():
    d = df.Distribution("beta:1,3")
    assert abs(d.mean - 0.25) < 1e-12
    assert str(df.Model("r2:2:beta:1,1.9")) == "r2:2:beta:1,1.9"

    sim = df.Simulation("r2:2:beta:1,1.9", seed=7)
    sim.grow_to(2000)
    sim.check_invariants()
    assert sim.t == 2000
    assert sum(sim.degrees()) == 2 * (2000 - 1)
    assert len(sim.fitness()) == 2000
    probs = sim.next_attachment_probabilities()
    assert abs(sum(probs) - 1.0) < 1e-9

    again = df.Simulation("r2:2:beta:1,1.9", seed=7)
    again.grow_to(2000)
    assert again.parents() == sim.parents()

    ba = df.Simulation("ba", seed=1)
    ba.grow_to(2000)
    tv = df.tv_distance(sim, ba)
    assert 0.0 <= tv <= 1.0
    fit = ba.tail_exponent(k_min=2, k_max=40)
    assert math.isfinite(fit["tau"])
    edges, mass, nodes = sim.fitness_landscape(bins=10)
    assert abs(sum(mass) - 2 * (2000 - 1)) < 1e-6
    assert sum(nodes) == 2000

    q = df.criterion_quadrature(d, 1)
    assert abs(q["value"] - df.beta_bb1_closed_form(1.0, 3.0)) < 1e-3
    assert q["verdict"] == "Condensing"
    mc = df.criterion_mc(d, 2, n_samples=100_000, seed=3)
    assert mc["lower"] <= mc["value"] <= mc["upper"]
    assert df.find_mstar(df.Distribution("beta:1,1.9")) == ("condensing", 2)
    assert df.find_mstar(df.Distribution("beta:3,1")) == ("non_condensing", "mean_at_least_half")

    try:
        df.Model("r9:1:uniform")
    except ValueError:
        pass
    else:
        raise AssertionError("bad model string accepted")

    spec = {"kind": "tv_curve", "model_a": "ba", "model_b": "ba", "b_seeding": "shared",
            "sizes": [50, 100], "trials": 3, "master_seed": 1}
    with tempfile.TemporaryDirectory() as out:
        report = df.run_experiment(json.dumps(spec), out_dir=out)
        assert all(row["mean"] == 0.0 for row in report["summary"])
        assert (Path(out) / "manifest.json").exists()

    print("smoke test passed")


if __name__ == "__main__":
    main()

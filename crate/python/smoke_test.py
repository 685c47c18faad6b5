#!/usr/bin/env python3
"""Smoke test for the polyclinch_py extension module.

Builds nothing itself: expects `cargo build -p polyclinch-py` (or
--release) to have produced libpolyclinch_py.so, copies it next to a
temporary directory under the importable name, and drives the bindings
through the worked example and a generated scenario.

Run from the repository root:

    cargo build -p polyclinch-py
    python3 python/smoke_test.py
"""

import json
import pathlib
import shutil
import sys
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / "release" / "libpolyclinch_py.so",
        REPO / "target" / "debug" / "libpolyclinch_py.so",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p polyclinch-py")
    staging = pathlib.Path(tempfile.mkdtemp(prefix="polyclinch-py-"))
    shutil.copy2(built, staging / "polyclinch_py.so")
    sys.path.insert(0, str(staging))
    import polyclinch_py

    return polyclinch_py


def main():
    pc = import_module()
    print(f"polyclinch_py {pc.__version__}")

    # The worked example: VCG on capped values is not Pareto-efficient,
    # the clinching auction is.
    ex = pc.Scenario.example1()
    assert ex.n() == 2 and ex.epsilon() == "1/4"
    assert ex.assumption1_compliant()

    vcg_x, vcg_pi = ex.vcg_baseline()
    assert vcg_x == ["1", "2"] and vcg_pi == ["0", "1"], (vcg_x, vcg_pi)

    improvement = ex.pareto_improvement(vcg_x, vcg_pi)
    assert improvement is not None, "VCG outcome should be improvable"
    _, _, gain = improvement
    assert gain == "4", gain

    passed, report = ex.verify(pareto=True, ic=True, oracle=True)
    assert passed, report
    report = json.loads(report)
    assert report["verification"]["passed"] is True

    clinch_x, clinch_pi = ex.outcome()
    assert ex.pareto_improvement(clinch_x, clinch_pi) is None

    # A generated scenario: deterministic, runnable, verifiable.
    s = pc.Scenario.generate(seed=7, n=3, kind="sponsored_search", epsilon="1/2")
    again = pc.Scenario.generate(seed=7, n=3, kind="sponsored_search", epsilon="1/2")
    assert s.to_json() == again.to_json()

    run_report = json.loads(s.run(check_invariants=True, full_trace=True))
    assert run_report["invariants"]["violations"] == []
    assert run_report["checkpoints"], "full trace should include checkpoints"

    round_trip = pc.Scenario.from_json(s.to_json())
    assert round_trip.to_json() == s.to_json()

    passed, _ = s.verify(pareto=True)
    assert passed

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()

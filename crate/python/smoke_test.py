#!/usr/bin/env python3
"""End-to-end smoke test for the opmeter Python bindings.

Locates the compiled extension under target/ (building it if needed),
imports it from a scratch directory, and drives the full pipeline:
synthetic design -> workload -> labels -> training -> evaluation ->
quantization -> fixed-point meter simulation -> file round trips.

Run from anywhere:  python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module(scratch: Path):
    candidates = [
        REPO / "target" / "release" / "libopmeter.so",
        REPO / "target" / "debug" / "libopmeter.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        subprocess.run(
            ["cargo", "build", "-p", "opmeter-py"], cwd=REPO, check=True
        )
        lib = candidates[1]
    shutil.copy(lib, scratch / "opmeter.so")
    sys.path.insert(0, str(scratch))
    import opmeter

    return opmeter


def check(name: str, condition: bool, detail: str = ""):
    if not condition:
        raise AssertionError(f"{name}: {detail}")
    print(f"  ok: {name}" + (f" ({detail})" if detail else ""))


def main():
    with tempfile.TemporaryDirectory() as tmp:
        scratch = Path(tmp)
        om = load_module(scratch)
        print(f"opmeter {om.version()} loaded from {scratch}")
        check("version agrees", om.version() == om.__version__)

        # Synthetic fixture: clustered toggles, sparse ground truth.
        design = om.Design(300, 12, 30, 0.55, 7)
        check("design support", len(design.support) == 12, repr(design))
        trace = design.workload(4000, 8, profile="uniform")
        check(
            "workload shape",
            trace.n_cycles == 4000 and trace.n_signals == 300,
            repr(trace),
        )
        labels = design.power_labels(trace, 0.02, 9)
        trace.set_power(labels)
        check("labels attached", trace.power is not None)

        # Packed trace file round trip.
        ptrc = scratch / "trace.ptrc"
        trace.write(str(ptrc))
        back = om.Trace.read(str(ptrc))
        check(
            "packed round trip",
            back.power == trace.power
            and all(
                back.toggle_positions(j) == trace.toggle_positions(j)
                for j in range(0, 300, 37)
            ),
        )

        # Waveform ingestion.
        vcd = scratch / "tiny.vcd"
        vcd.write_text(
            "$timescale 1ns $end\n"
            "$scope module top $end\n"
            "$var wire 1 c clk $end\n"
            "$var wire 1 ! a $end\n"
            "$upscope $end\n"
            "$enddefinitions $end\n"
            "#0\n0c\n0!\n#1\n1c\n#2\n0c\n1!\n#3\n1c\n"
        )
        wave = om.Trace.read_vcd(str(vcd), "top.clk")
        check(
            "waveform ingestion",
            wave.n_cycles == 2 and wave.signal_names == ["top.a"],
            f"{wave.n_cycles} cycles, names {wave.signal_names}",
        )

        # Training and evaluation.
        model, info = om.Model.train(trace, 12, penalty="mcp", gamma=10.0)
        sel = info["selection"]
        check(
            "selection hit window",
            sel["hit_window"] and len(model.proxy_indices) >= 10,
            f"{sel['support_size']} proxies at lambda {sel['lambda']:.3e}",
        )
        truth = set(design.support)
        hits = sum(1 for j in model.proxy_indices if j in truth)
        check("support recovery", hits >= 10, f"{hits}/12 true contributors")

        pred = model.predict(trace)
        err = om.nrmse(labels, pred)
        check("training-set nrmse", err < 0.2, f"nrmse {err:.4f}")

        report = model.evaluate(trace, windows=[16])
        r2 = report["per_cycle"]["r2"]
        check("evaluation r2", r2 > 0.9, f"r2 {r2:.4f}")
        check(
            "window metrics present",
            report["windows"][0]["window"] == 16,
        )

        # Model document round trips.
        mpath = scratch / "model.json"
        model.save(str(mpath))
        reloaded = om.Model.load(str(mpath))
        check(
            "model file round trip",
            reloaded.weights == model.weights
            and reloaded.proxy_indices == model.proxy_indices,
        )
        check(
            "model json round trip",
            om.Model.from_json(model.to_json()).weights == model.weights,
        )

        # Quantization and the fixed-point meter.
        qm = model.quantize(10)
        check(
            "weights fit register",
            max(qm.q_weights) <= 1023 and qm.bits == 10,
            f"max integer weight {max(qm.q_weights)}",
        )
        check(
            "datapath widths",
            qm.acc_width(16) == qm.cycle_sum_width + 4,
            f"cycle {qm.cycle_sum_width}b, window {qm.acc_width(16)}b",
        )

        sim = qm.simulate(trace, 16)
        float_windows = model.predict_window(trace, 16)
        bound = qm.error_bound(16)
        worst = max(
            abs(a - b) for a, b in zip(sim["values"], float_windows)
        )
        check(
            "meter tracks float model",
            worst <= bound and len(sim["raw"]) == 4000 // 16,
            f"worst gap {worst:.3e} <= bound {bound:.3e}",
        )
        check(
            "meter output is integral",
            all(isinstance(r, int) for r in sim["raw"]),
        )

        opath = scratch / "opm.json"
        qm.save(str(opath), 16)
        qm2, window = om.QuantizedModel.load(str(opath))
        check(
            "meter document round trip",
            window == 16 and qm2.q_weights == qm.q_weights,
        )
        doc = json.loads(opath.read_text())
        check(
            "meter document format",
            doc["format"] == "opmeter-opm" and doc["latency_cycles"] == 2,
        )

        # Error mapping.
        bare = design.workload(64, 11)
        try:
            om.Model.train(bare, 4)
            raise AssertionError("training an unlabeled trace must fail")
        except ValueError:
            print("  ok: unlabeled training raises ValueError")
        try:
            om.nrmse([1.0, 2.0], [1.0])
            raise AssertionError("length mismatch must fail")
        except ValueError:
            print("  ok: metric length mismatch raises ValueError")
        try:
            model.predict_window(trace, 12)
            raise AssertionError("non-power-of-two window must fail")
        except ValueError:
            print("  ok: bad window size raises ValueError")
        check("finite outputs", all(map(math.isfinite, pred)))

    print("PASS: python bindings smoke test")


if __name__ == "__main__":
    main()

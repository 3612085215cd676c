#!/usr/bin/env python3
"""End-to-end smoke test of the cents_py extension module.

Builds nothing itself: expects `cargo build --release -p cents-py` (or a debug
build) to have produced the cdylib, which gets copied next to a temp dir and
imported. Exercises faux data generation, training, sampling, persistence,
and the metric suite at a tiny scale.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        REPO / "target" / "release" / "libcents_py.so",
        REPO / "target" / "debug" / "libcents_py.so",
        REPO / "target" / "release" / "libcents_py.dylib",
        REPO / "target" / "debug" / "libcents_py.dylib",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("build the extension first: cargo build --release -p cents-py")
    stage = Path(tempfile.mkdtemp(prefix="cents_py_"))
    shutil.copy2(lib, stage / "cents_py.so")
    sys.path.insert(0, str(stage))
    import cents_py

    return cents_py


def main():
    cents = import_extension()
    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {name}")
        if not ok:
            sys.exit(1)

    print("cents_py smoke test")

    # Faux data with a fixed seed is reproducible.
    ds, truth_csv = cents.synth_dataset(seed=7, n_households=24, days_per_household=4)
    ds2, _ = cents.synth_dataset(seed=7, n_households=24, days_per_household=4)
    check("faux dataset size", len(ds) == 96)
    check("faux determinism", ds.series(0) == ds2.series(0))
    check("ground truth lists pv_dip", "pv_dip" in truth_csv)
    check("vocabulary has month/weekday", [v[0] for v in ds.vocabulary][-2:] == ["month", "weekday"])

    # Sparsity labels attach to the dataset.
    mask = ds.label_sparsity(k=8)
    check("sparsity mask length", len(mask) == len(ds))

    # CSV round trip.
    with tempfile.TemporaryDirectory() as td:
        p, m = Path(td) / "p.csv", Path(td) / "m.csv"
        ds.to_csv(p, m)
        back = cents.Dataset.from_csv(p, m)
        check("csv round trip", len(back) == len(ds) and back.series(3) == ds.series(3))

    # Tiny training run.
    cfg = cents.Config.desk(
        "diffusion",
        epochs=3,
        batch_size=32,
        normalizer_steps=150,
        t_steps=10,
        trunk_hidden=16,
        encoder_hidden=16,
        head_hidden=8,
        noise_dim=8,
        h_dim=8,
        embed_dim=8,
        top_k=3,
        seed=5,
    )
    check("paper preset values", cents.Config.paper("acgan").to_dict()["batch_size"] == "1024")
    ckpt = cents.train(cfg, ds)
    log = ckpt.training_log
    check("training log has 3 epochs", len(log) == 3)

    # Context encoding and stat prediction on an unseen combination.
    ctx = ds.context(0)
    h = ckpt.encode_context(ctx)
    check("context embedding width", len(h) == 8)
    stats = ckpt.predict_stats(ctx)
    check("predicted sigma non-negative", all(s >= 0 for s in stats["sigma"]))
    check(
        "predicted bounds ordered",
        all(lo <= hi for lo, hi in zip(stats["z_min"], stats["z_max"])),
    )

    # Sampling: deterministic per seed, correct shape, finite values.
    syn = ckpt.generate([ctx], per_context=5, seed=3)
    syn2 = ckpt.generate([ctx], per_context=5, seed=3)
    check("generation shape", len(syn) == 5 and len(syn.series(0)) == ds.t_len)
    check("generation determinism", syn.series(2) == syn2.series(2))

    # Checkpoint persistence round trip.
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "model.cnts"
        ckpt.save(path)
        loaded = cents.Checkpoint.load(path)
        again = loaded.generate([ctx], per_context=5, seed=3)
        check("checkpoint round trip", again.series(2) == syn.series(2))

    # Synthetic equivalent of the training set, then the metric suite.
    contexts = [ds.context(i) for i in range(len(ds))]
    syn_full = ckpt.generate(contexts, per_context=1, seed=11)
    report = cents.evaluate(ds, syn_full, seed=2)
    check("report has overall metrics", "overall" in report and "context_fid" in report["overall"])
    check("sparse block present", report["sparse_only"] is not None)
    print(f"  overall context_fid = {report['overall']['context_fid']:.4f}")

    # Direct metric kernels.
    a = [[0.0], [1.0]]
    b = [[1.0], [0.0]]
    check("mdtwd identical is zero", cents.mdtwd(a, a) == 0.0)
    check("mdtwd forced case", abs(cents.mdtwd(a, b) - 2.0) < 1e-12)
    pool = [[float(i), float(i % 3)] for i in range(10)]
    check("mmd identical is zero", cents.mmd(pool, pool) == 0.0)
    check("feature embed width", len(cents.feature_embed(ds.series(0))) == 17)

    # Normalization round trip with explicit stats.
    series = ds.series(0)
    z = cents.normalize(series, [1.0], [0.5], [-2.0], [2.0])
    x = cents.denormalize(z, [1.0], [0.5], [-2.0], [2.0])
    err = max(abs(u[0] - v[0]) for u, v in zip(series, x))
    check("normalize/denormalize round trip", err < 1e-9)

    print(f"all {checks} checks passed")


if __name__ == "__main__":
    main()

"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -m acceptance -s`` to see the lines inline; they are
also collected into the terminal summary.
"""

import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from instances import random_dataset, random_input, random_output, random_sequence_space, random_taxonomy
from oracles import central_difference, frozen_local_objective, frozen_surrogate
from localstruct.cli import main
from localstruct.core import Hyperparameters, PredictorBank
from localstruct.experiment import ExperimentConfig, GlobalLearner, run_baseline_global, run_experiment
from localstruct.features import feature_dimension, feature_spec
from localstruct.inference import impute_output, loss_augmented_argmax, predict
from localstruct.losses import HammingLoss, SequenceZeroOneLoss, TreeAncestorLoss
from localstruct.trainer import (
    Problem,
    build_neighborhoods,
    fit,
    initial_state,
    refresh_augmented_targets,
    subgradient,
    update_outputs,
)

pytestmark = pytest.mark.acceptance

D_X = 2


def verdict(name, ok, detail, elapsed=None, budget=None):
    timing = ""
    if elapsed is not None:
        timing = f" [{elapsed:.2f}s" + (f" / budget {budget:.0f}s]" if budget else "]")
        ok = ok and (budget is None or elapsed < budget)
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}{timing}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def dim(space):
    return feature_dimension(feature_spec(space, D_X))


def random_training_state(rng, space, loss, backend, n=6, labeled=2, k=3):
    ds = random_dataset(rng, space, n, labeled, D_X)
    problem = Problem(ds, loss, backend)
    nbs = build_neighborhoods(ds, k)
    state = initial_state(problem)
    state.predictors = PredictorBank(rng.normal(size=(n, problem.m)))
    state.outputs = state.outputs[:labeled] + [random_output(rng, space) for _ in range(n - labeled)]
    state.augmented = refresh_augmented_targets(problem, state, nbs)
    return problem, nbs, state


def test_oracle_equivalence():
    rng = np.random.default_rng(20240)
    start = time.perf_counter()
    instances, worst, mismatches = 0, 0.0, []
    losses = [HammingLoss(True), HammingLoss(False), SequenceZeroOneLoss()]
    for trial in range(210):
        space = random_sequence_space(rng, max_labels=3, max_length=5)
        loss = losses[trial % 3]
        x = random_input(rng, space, D_X)
        w = rng.normal(size=dim(space))

        if predict(w, x, space, "dp") != predict(w, x, space, "exhaustive"):
            mismatches.append((trial, "predict"))

        y_cur = random_output(rng, space)
        z_dp, v_dp = loss_augmented_argmax(w, x, y_cur, loss, space, "dp")
        z_ex, v_ex = loss_augmented_argmax(w, x, y_cur, loss, space, "exhaustive")
        if z_dp != z_ex:
            mismatches.append((trial, "loss_augmented_argmax"))
        worst = max(worst, abs(v_dp - v_ex))

        problem, nbs, state = random_training_state(rng, space, loss, "dp")
        for i in range(problem.labeled_count, problem.n):
            a = impute_output(i, problem.dataset, state, nbs, loss, "dp")
            b = impute_output(i, problem.dataset, state, nbs, loss, "exhaustive")
            if a != b:
                mismatches.append((trial, f"impute_output point {i}"))
        instances += 1
    elapsed = time.perf_counter() - start
    verdict(
        "oracle equivalence",
        not mismatches and worst <= 1e-9,
        f"{instances} instances, argmax mismatches={mismatches[:5]}, max |value diff|={worst:.2e}",
        elapsed, 30,
    )


def test_bound_validity():
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    checked, failures = 0, []
    for variant in ("taxonomy", "sequence"):
        for trial in range(200):
            if variant == "taxonomy":
                space = random_taxonomy(rng, random_codes=bool(trial % 2))
                loss = TreeAncestorLoss(space)
            else:
                space = random_sequence_space(rng)
                loss = HammingLoss() if trial % 2 else SequenceZeroOneLoss()
            x = random_input(rng, space, D_X)
            w = rng.normal(size=dim(space))
            y_cur = random_output(rng, space)
            _, bound = loss_augmented_argmax(w, x, y_cur, loss, space)
            if not (bound >= 0 and bound >= loss(y_cur, predict(w, x, space))):
                failures.append((variant, trial, bound))
            checked += 1
    elapsed = time.perf_counter() - start
    verdict("bound validity", not failures, f"{checked} triples, violations={failures[:5]}", elapsed, 10)


def test_subgradient_finite_differences():
    rng = np.random.default_rng(12)
    start = time.perf_counter()
    worst, count = 0.0, 0
    for trial in range(60):
        if trial % 2:
            space = random_sequence_space(rng)
            loss, backend = HammingLoss(), "dp"
        else:
            space = random_taxonomy(rng)
            loss, backend = TreeAncestorLoss(space), "auto"
        problem, nbs, state = random_training_state(rng, space, loss, backend)
        C = float(rng.uniform(0.1, 2.0))
        i = int(rng.integers(problem.n))
        members = nbs[i].members
        xs = [problem.inputs[j] for j in members]
        ys = [state.outputs[j] for j in members]
        zs = [state.augmented[i, j] for j in members]
        fd = central_difference(
            lambda w: frozen_local_objective(w, xs, ys, zs, loss, space, C), state.predictors[i].copy()
        )
        sg = subgradient(problem, i, state, nbs, C)
        worst = max(worst, float(np.linalg.norm(sg - fd) / max(np.linalg.norm(fd), 1e-12)))
        count += 1
    elapsed = time.perf_counter() - start
    verdict("sub-gradient check", worst <= 1e-5, f"{count} instances, max relative error={worst:.2e}",
            elapsed, 30)


def test_y_phase_monotonicity():
    rng = np.random.default_rng(13)
    start = time.perf_counter()
    worst, count = -np.inf, 0
    for trial in range(60):
        if trial % 2:
            space = random_sequence_space(rng)
            loss = [HammingLoss(), SequenceZeroOneLoss()][trial % 4 // 2]
        else:
            space = random_taxonomy(rng)
            loss = TreeAncestorLoss(space)
        problem, nbs, state = random_training_state(rng, space, loss, "auto", n=8, labeled=3, k=3)
        W = state.predictors.weights

        def surrogate(outputs):
            return frozen_surrogate(problem.inputs, outputs, W, state.augmented, nbs, loss, space, 1.0)

        before = surrogate(state.outputs)
        after = surrogate(update_outputs(problem, state, nbs))
        worst = max(worst, after - before)
        count += 1
    elapsed = time.perf_counter() - start
    verdict("y-phase monotonicity", worst <= 1e-9, f"{count} instances, max increase={worst:.2e}", elapsed)


def test_labeled_output_invariance():
    rng = np.random.default_rng(14)
    start = time.perf_counter()
    broken, count = [], 0
    for trial in range(12):
        space = random_sequence_space(rng, max_length=4) if trial % 2 else random_taxonomy(rng)
        ds = random_dataset(rng, space, 10, 4, D_X)
        report = fit(ds, Hyperparameters(k=3, T=50, eta=0.1))
        for i in range(ds.labeled_count):
            if report.state.outputs[i] != ds.points[i].truth:
                broken.append((trial, i))
        count += 1
    elapsed = time.perf_counter() - start
    verdict("labeled-output invariance", not broken, f"{count} fits with T=50, changed labels={broken}", elapsed)


def test_degenerate_equivalence():
    rng = np.random.default_rng(15)
    start = time.perf_counter()
    unequal, worst_gap, count = [], 0.0, 0
    for trial in range(6):
        space = random_sequence_space(rng, max_length=3) if trial % 2 else random_taxonomy(rng)
        ds = random_dataset(rng, space, 8, 8, D_X)
        hp = Hyperparameters(k=8, T=15, eta=0.1)
        snapshots = []

        def check(t, state):
            W = state.predictors.weights
            if not np.all(W == W[0]):
                unequal.append((trial, t))
            snapshots.append(W[0].copy())

        report = fit(ds, hp, callback=check)
        inputs, truths = [p.input for p in ds.points], [p.truth for p in ds.points]
        for t in (1, 5, 15):
            glob = GlobalLearner(space, report.problem.loss).fit(
                inputs, truths, Hyperparameters(k=8, T=t, eta=0.1)
            )
            worst_gap = max(worst_gap, float(np.max(np.abs(snapshots[t - 1] - glob.w))))
        count += 1
    elapsed = time.perf_counter() - start
    verdict(
        "degenerate equivalence",
        not unequal and worst_gap <= 1e-12,
        f"{count} fits, iterations with unequal w_i={unequal}, max gap to global learner={worst_gap:.1e}",
        elapsed,
    )


def test_directional_replication():
    synthetic = {"clusters": 2, "points_per_cluster": 100, "d_x": 5, "rule": "opposed", "seed": 7,
                 "output_space": {"type": "taxonomy", "depth": 3, "branching": 2}}
    cfg = ExperimentConfig(synthetic=synthetic, folds=10, labeled_fraction=0.5, seed=7)
    start = time.perf_counter()
    local = run_experiment(cfg)
    glob = run_baseline_global(cfg)
    elapsed = time.perf_counter() - start
    pooled = float(np.sqrt((local.std ** 2 + glob.std ** 2) / cfg.folds))
    gap = glob.mean - local.mean
    verdict(
        "directional replication",
        local.mean < glob.mean and gap > pooled,
        f"local mean={local.mean:.4f} (se {local.standard_error:.4f}), global mean={glob.mean:.4f} "
        f"(se {glob.standard_error:.4f}), gap={gap:.4f} vs pooled se={pooled:.4f}",
        elapsed, 60,
    )


def test_determinism(tmp_path):
    cfg = {"synthetic": {"clusters": 2, "points_per_cluster": 30, "d_x": 4, "seed": 3}, "folds": 5, "T": 20,
           "seed": 5}
    (tmp_path / "exp.json").write_text(json.dumps(cfg))
    start = time.perf_counter()
    texts = []
    for name in ("a.json", "b.json"):
        assert main(["experiment", str(tmp_path / "exp.json"), "-o", str(tmp_path / name)]) == 0
        lines = (tmp_path / name).read_text().splitlines(keepends=True)
        texts.append("".join(line for line in lines if '"wall_clock_seconds"' not in line).encode())
    elapsed = time.perf_counter() - start
    verdict("determinism", texts[0] == texts[1], f"result files identical apart from wall clock: "
            f"{texts[0] == texts[1]} ({len(texts[0])} bytes)", elapsed)

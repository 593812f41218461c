"""The outer self-evolution loop.

Per iteration: encode, fuzzy memberships, confident selection, boundary
cleaning, augmentation, classifier fine-tuning, target prediction, then SGD
on the KL clustering loss over encoder weights and centers.
"""
from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as M
from .augment import AugmentConfig, build_augmented_set
from .classifier import accuracy, finetune, init_classifier, predict_target, save_classifier
from .cleaning import CleaningResult, Region, clean_cluster, write_projection_csv
from .config import RunConfig
from .dataset import Dataset, load_csv, load_idx, subsample, synth_blobs
from .extractor import (ExtractorState, apply_clustering_gradient, encode, pretrain,
                        save_extractor)
from .fuzzy import (FuzzyConfig, clustering_loss_grads, hard_labels, kl_terms, membership,
                    stable_init)
from .numerics import ContractError, derive_seed, make_rng
from .selection import SelectionSchedule, eta_at, select_confident

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("iter", "L_C", "eta", "acc", "nmi", "ari", "label_change", "classifier_acc")

# sub-stream keys for derive_seed
_PRETRAIN, _INIT, _CLF, _CLEAN, _AUG, _FINETUNE, _SGD, _SUBSAMPLE, _SYNTH = range(9)


class RunError(RuntimeError):
    pass


def kl_loss(U, P) -> float:
    """sum_ij u_ij log(u_ij / p_ij), with 0 log 0 = 0."""
    U = np.asarray(U, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if U.shape != P.shape:
        raise ContractError(f"shape mismatch {U.shape} vs {P.shape}")
    return float(np.sum(kl_terms(U, P)))


def _hard(P) -> np.ndarray:
    P = np.asarray(P)
    return np.argmax(P, axis=1) if P.ndim == 2 else P.astype(np.int64)


def label_change(P_t, P_prev) -> float:
    """1 - mean row inner product of the two hard one-hot targets."""
    a, b = _hard(P_t), _hard(P_prev)
    if a.shape != b.shape:
        raise ContractError("targets cover different sample counts")
    return float(np.mean(a != b))


def stop_check(P_t, P_prev, delta: float) -> bool:
    """True once the fraction of changed hard targets drops below ``delta``.

    Accepts label vectors or distributions (argmax is taken, so smoothing is ignored).
    """
    if P_prev is None:
        return False
    return label_change(P_t, P_prev) < delta


@dataclass
class IterationRecord:
    iter: int
    L_C: float
    L_C_before: float
    eta: float
    acc: float
    nmi: float
    ari: float
    label_change: float
    classifier_acc: float
    n_selected: int
    n_augmented: int
    target_acc: float = math.nan        # classifier targets vs. truth, diagnostics only
    region_counts: dict = field(default_factory=dict)

    def csv_row(self) -> str:
        return ",".join(repr(v) if isinstance(v, float) else str(v)
                        for v in (getattr(self, c) for c in METRIC_COLUMNS))


@dataclass
class RunResult:
    assignments: np.ndarray
    history: list[IterationRecord]
    stop_reason: str
    wall_time: float
    baseline: dict            # FCM on the pretrained embeddings, before the loop
    centers: np.ndarray
    extractor: ExtractorState | None = None
    classifier: object = None

    def metrics_csv(self) -> str:
        return ",".join(METRIC_COLUMNS) + "\n" + "".join(r.csv_row() + "\n" for r in self.history)


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.data_format == "synth":
        ds = synth_blobs(cfg.synth_k, cfg.synth_n_per, cfg.synth_dim, cfg.synth_sep,
                         cfg.synth_noise, derive_seed(cfg.seed, _SYNTH))
    elif cfg.data_format == "idx":
        ds = load_idx(cfg.data_path, cfg.labels_path or None)
    else:
        ds = load_csv(cfg.data_path, has_labels=cfg.csv_labels)
    if cfg.subsample:
        ds = subsample(ds, cfg.subsample, cfg.subsample_balanced, derive_seed(cfg.seed, _SUBSAMPLE))
    return ds


def _workers(n_jobs: int) -> int:
    env = os.environ.get("SELF_EVOC_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _score(labels, truth) -> dict:
    if truth is None:
        return {"acc": math.nan, "nmi": math.nan, "ari": math.nan}
    return M.evaluate(labels, truth)


def _clean_all(Z, selection, cfg: RunConfig, it: int) -> list[CleaningResult]:
    def job(j):
        ix = selection.indices[j]
        return clean_cluster(Z[ix], ix, cfg.projection, cfg.tsne_perplexity, cfg.tsne_iters,
                             cfg.min_pts, cfg.dbscan_eps, derive_seed(cfg.seed, _CLEAN, it, j))
    jobs = range(selection.K)
    with ThreadPoolExecutor(_workers(selection.K)) as pool:
        return list(pool.map(job, jobs))


def _sgd_epochs(ext: ExtractorState, mu: np.ndarray, X: np.ndarray, P: np.ndarray,
                cfg: RunConfig, it: int) -> np.ndarray:
    """Minibatch descent on the clustering loss; centers and encoder step together."""
    rng = make_rng(derive_seed(cfg.seed, _SGD, it))
    n = len(X)
    mu = mu.copy()
    for _ in range(cfg.inner_epochs):
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch):
            idx = order[s:s + cfg.batch]
            Zb = encode(ext, X[idx])
            dZ, dmu, _ = clustering_loss_grads(Zb, mu, cfg.m, P[idx])
            mu -= (cfg.lr / len(idx)) * dmu
            apply_clustering_gradient(ext, X[idx], dZ, cfg.lr)
    return mu


def run(cfg: RunConfig, out_dir=None, dataset: Dataset | None = None,
        extractor: ExtractorState | None = None) -> RunResult:
    """Execute the full loop; ``extractor`` (copied) skips pretraining when given."""
    t0 = time.perf_counter()
    ds = dataset if dataset is not None else load_dataset(cfg)
    X, truth = ds.samples, ds.true_labels
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.snapshot").write_text(cfg.snapshot())
        if cfg.checkpoints:
            (out / "checkpoints").mkdir(exist_ok=True)

    if extractor is not None:
        ext = extractor.copy()
    else:
        log.info("pretraining extractor on %d x %d", *X.shape)
        ext = pretrain(X, cfg.pretrain_epochs, min(cfg.pretrain_batch, len(X)), cfg.pretrain_lr,
                       derive_seed(cfg.seed, _PRETRAIN), cfg.latent_dim, cfg.ae_hidden,
                       cfg.pretrain_momentum)
    Z = encode(ext, X)
    fuzzy_cfg = FuzzyConfig(cfg.K, cfg.m, cfg.fcm_tol, cfg.fcm_max_iter, cfg.M)
    mu = stable_init(Z, fuzzy_cfg, derive_seed(cfg.seed, _INIT))
    baseline = _score(hard_labels(membership(Z, mu, cfg.m)), truth)
    log.info("initial clustering: %s", baseline)

    schedule = SelectionSchedule(cfg.eta0, cfg.delta_eta, cfg.eta_cap)
    aug_cfg = AugmentConfig(cfg.aug_rotation, cfg.aug_shift, cfg.aug_noise, cfg.aug_base_count)
    clf = init_classifier(X.shape[1], cfg.K, cfg.clf_hidden, derive_seed(cfg.seed, _CLF))
    history: list[IterationRecord] = []
    prev_targets = None
    stop_reason = "max_iter"

    for it in range(cfg.n_max):
        try:
            Z = encode(ext, X)
            U = membership(Z, mu, cfg.m)
            eta = eta_at(schedule, it)
            selection = select_confident(U, eta)
            graded = _clean_all(Z, selection, cfg, it)
            aug = build_augmented_set(X, ds.image_shape, selection, graded,
                                      derive_seed(cfg.seed, _AUG, it), aug_cfg)
            if cfg.clf_fresh:
                clf = init_classifier(X.shape[1], cfg.K, cfg.clf_hidden, derive_seed(cfg.seed, _CLF))
            clf = finetune(clf, aug, cfg.clf_epochs, cfg.clf_batch, cfg.clf_lr,
                           derive_seed(cfg.seed, _FINETUNE, it), cfg.clf_momentum)
            clf_acc = accuracy(clf, aug.samples, aug.labels)
            P = predict_target(clf, X, cfg.eps_smooth)
            loss_before = kl_loss(U, P)
            mu = _sgd_epochs(ext, mu, X, P, cfg, it)
            Z = encode(ext, X)
            U = membership(Z, mu, cfg.m)
            loss_after = kl_loss(U, P)
        except Exception as exc:
            raise RunError(f"iteration {it}: {exc}") from exc
        if not math.isfinite(loss_after):
            raise RunError(f"iteration {it}: clustering loss is not finite")

        targets = np.argmax(P, axis=1)
        change = math.nan if prev_targets is None else label_change(targets, prev_targets)
        regions = np.concatenate([g.regions for g in graded])
        rec = IterationRecord(
            it, loss_after, loss_before, eta, **_score(hard_labels(U), truth),
            label_change=change, classifier_acc=clf_acc, n_selected=len(selection),
            n_augmented=len(aug),
            target_acc=_score(targets, truth)["acc"],
            region_counts={r.name.lower(): int(np.sum(regions == r)) for r in Region})
        history.append(rec)
        log.info("iter %d eta %.2f L_C %.4f -> %.4f acc %.4f target_acc %.4f clf_acc %.4f "
                 "change %s", it, eta, loss_before, loss_after, rec.acc, rec.target_acc, clf_acc,
                 change)

        if out is not None:
            if cfg.checkpoints:
                save_extractor(ext, out / "checkpoints" / f"extractor_{it:03d}.sevc")
                save_classifier(clf, out / "checkpoints" / f"classifier_{it:03d}.sevc")
                np.savetxt(out / "checkpoints" / f"centers_{it:03d}.csv", mu, delimiter=",",
                           fmt="%.17g")
            if cfg.dump_projections:
                write_projection_csv(out / f"projection_{it:03d}.csv", graded)

        if stop_check(targets, prev_targets, cfg.delta):
            stop_reason = "converged"
            break
        prev_targets = targets

    assignments = hard_labels(membership(encode(ext, X), mu, cfg.m))
    result = RunResult(assignments, history, stop_reason, time.perf_counter() - t0, baseline,
                       mu, ext, clf)
    if out is not None:
        (out / "metrics.csv").write_text(result.metrics_csv())
        write_assignments(out / "assignments.csv", assignments)
    return result


def write_assignments(path, labels) -> None:
    with open(path, "w") as f:
        f.write("sample_index,cluster\n")
        for i, c in enumerate(labels):
            f.write(f"{i},{int(c)}\n")


def read_assignments(path) -> np.ndarray:
    """Labels from a ``sample_index,cluster`` CSV, a one-label-per-line text
    file, or an IDX label file."""
    from .dataset import read_idx_labels
    with open(path, "rb") as f:
        head = f.read(4)
    if head in (b"\x00\x00\x08\x01",) or head[:2] == b"\x1f\x8b":
        return read_idx_labels(path)
    rows = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
    if rows and not rows[0].split(",")[-1].lstrip("-").isdigit():
        rows = rows[1:]
    pairs = [r.split(",") for r in rows]
    if pairs and len(pairs[0]) == 2:
        order = np.array([int(p[0]) for p in pairs])
        vals = np.array([int(p[1]) for p in pairs])
        out = np.empty(len(vals), dtype=np.int64)
        out[order] = vals
        return out
    return np.array([int(p[0]) for p in pairs], dtype=np.int64)

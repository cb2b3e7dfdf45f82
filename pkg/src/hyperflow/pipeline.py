"""Stage orchestration: data -> envs -> incidence -> line graph -> train -> embed -> metrics -> eval."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score
from threadpoolctl import threadpool_limits

from . import io
from .config import config_hash, semantic_items
from .environments import MembershipConfig, build_environments, sample_non_adjacent
from .graph import Hypergraph, IncidenceMatrix, LineGraph, build_incidence
from .linegraph import build_line_graph
from .metrics import compute_report
from .model import ModelConfig, ModelParams, Operators, embed, representation
from .rng import stream
from .tasks import TaskHead, link_auc, scale_scores, split_edges
from .training import Trainer, TrainConfig

log = logging.getLogger(__name__)

STAGES = ("data", "envs", "incidence", "linegraph", "train", "embed", "metrics", "eval")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Pipeline:
    """One configured run. Stage methods memoize; with ``reuse`` they load
    earlier artifacts from the output directory instead of recomputing."""

    def __init__(self, cfg: dict, reuse: bool = False):
        self.cfg = cfg
        self.seed = cfg["seed"]
        self.out = Path(cfg["output"])
        self.reuse = reuse
        self.timings: dict[str, float] = {}
        self.completed: list[str] = []
        self.artifacts: dict[str, str] = {}
        self._memo: dict[str, object] = {}

    # -- bookkeeping ---------------------------------------------------
    def path(self, name: str) -> Path:
        return self.out / name

    def _record(self, *names: str):
        for n in names:
            self.artifacts[n] = sha256_file(self.path(n))

    @contextmanager
    def _stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except Exception as exc:
            self.timings[name] = time.perf_counter() - t0
            self.write_manifest(failed=name, error=str(exc))
            raise StageError(name, exc) from exc
        self.timings[name] = time.perf_counter() - t0
        self.completed.append(name)
        log.info("stage %s done in %.2fs", name, self.timings[name])

    def manifest(self, failed: str | None = None, error: str | None = None) -> dict:
        m = {
            "config": semantic_items(self.cfg),
            "config_hash": config_hash(self.cfg),
            "seed": self.seed,
            "stages": list(self.completed),
            "artifacts": dict(sorted(self.artifacts.items())),
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
        }
        if failed:
            m["failed_stage"] = failed
            m["error"] = error
        return m

    def write_manifest(self, **kw) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.path("manifest.json")
        p.write_text(json.dumps(self.manifest(**kw), indent=2, sort_keys=True) + "\n",
                     encoding="utf-8")
        return p

    def _memoized(self, key, fn):
        if key not in self._memo:
            self._memo[key] = fn()
        return self._memo[key]

    # -- stages ----------------------------------------------------------
    def data(self) -> dict:
        return self._memoized("data", self._data)

    def _data(self) -> dict:
        c = self.cfg
        with self._stage("data"):
            self.out.mkdir(parents=True, exist_ok=True)
            weights = {}
            if c["data.source"] == "karate":
                g = io.karate_club()
            elif c["data.source"] == "planted":
                spec = io.PlantedSpec(c["planted.cliques"], c["planted.size"],
                                      c["planted.inter_p"], c["planted.noise"])
                g = io.generate_planted(spec, self.seed)
            else:
                g = io.load_dataset(c["data.edges"], c["data.features"],
                                    feature_header=c["data.feature_header"])
                weights = io.read_edge_weights(c["data.edges"])
            result = {"graph": g, "train_graph": g, "split": None, "ratings": None}
            task = c["train.task"]
            if task is not None:
                split = split_edges(g.pairwise_edges, g.node_count, c["eval.test_fraction"],
                                    c["eval.neg_per_pos"], self.seed)
                result["split"] = split
                result["train_graph"] = Hypergraph(g.features, (), split.train,
                                                   node_count=g.node_count)
                io.write_edges(self.path("train_edges.tsv"), split.train)
                io.write_pairs(self.path("test_pos.tsv"), split.test_pos)
                io.write_pairs(self.path("test_neg.tsv"), split.test_neg)
                self._record("train_edges.tsv", "test_pos.tsv", "test_neg.tsv")
                if task == "rating_regression":
                    if not weights:
                        raise io.DataError("rating_regression needs a weighted edge file")
                    keys = sorted(weights)
                    scaled = dict(zip(keys, scale_scores([weights[k] for k in keys])))
                    result["ratings"] = scaled
        return result

    def envs(self) -> Hypergraph:
        return self._memoized("envs", self._envs)

    def _envs(self) -> Hypergraph:
        c = self.cfg
        d = self.data()
        g = d["train_graph"]
        with self._stage("envs"):
            cached = self.path("hyperedges.txt")
            if c["env.method"] == "file":
                hedges = io.read_hyperedges(c["data.hyperedges"], g.node_count)
            elif self.reuse and cached.exists():
                hedges = io.read_hyperedges(cached, g.node_count)
            else:
                mcfg = MembershipConfig(hidden=c["env.hidden"], neg_ratio=c["env.neg_ratio"],
                                        epochs=c["env.epochs"], lr=c["env.lr"])
                hedges = build_environments(c["env.method"], g.features, g.pairwise_edges,
                                            g.node_count, env_count=c["env.C"],
                                            tau=c["env.tau"], k=c["env.k"], seed=self.seed,
                                            cfg=mcfg)
            hg = g.with_hyperedges(hedges)
            io.write_hyperedges(cached, hg.hyperedges)
            self._record("hyperedges.txt")
        return hg

    def incidence(self) -> IncidenceMatrix:
        return self._memoized("incidence", self._incidence)

    def _incidence(self) -> IncidenceMatrix:
        g = self.envs()
        with self._stage("incidence"):
            return build_incidence(g)

    def line_graph(self) -> LineGraph:
        return self._memoized("linegraph", self._line_graph)

    def _line_graph(self) -> LineGraph:
        c = self.cfg
        g = self.envs()
        with self._stage("linegraph"):
            cached = self.path("line_graph.tsv")
            if self.reuse and cached.exists():
                lg = io.read_line_graph(cached, g.edge_count)
            else:
                lg = build_line_graph(g, c["line.max_len"], c["line.repeats"],
                                      c["line.samples"], self.seed)
            io.write_line_graph(cached, lg)
            self._record("line_graph.tsv")
        return lg

    def operators(self) -> Operators:
        return self._memoized("ops", lambda: Operators.build(
            self.envs(), self.incidence(), self.line_graph(), self.cfg["model.K"],
            self.cfg["model.gamma"]))

    def model_config(self) -> ModelConfig:
        c = self.cfg
        return ModelConfig(tuple(c["model.hyper_dims"]), tuple(c["model.pair_dims"]),
                           c["model.K"], c["model.gamma"], c["model.activation"])

    def train_config(self) -> TrainConfig:
        c = self.cfg
        return TrainConfig(m_p=c["train.m_p"], m_n=c["train.m_n"],
                           neg_ratio=c["train.neg_ratio"], epochs=c["train.epochs"],
                           learning_rate=c["train.lr"], optimizer=c["train.optimizer"],
                           seed=self.seed, mode=c["train.mode"], task=c["train.task"],
                           task_weight=c["train.lambda"],
                           resample_negatives=c["train.resample_negatives"],
                           joint=c["train.joint"],
                           snapshot_every=c["metrics.snapshot_every"],
                           snapshot_kind=c["metrics.embedding"])

    def task_head(self) -> TaskHead | None:
        c = self.cfg
        if c["train.mode"] != "unpluggable":
            return None
        d = self.data()
        split = d["split"]
        if c["train.task"] == "link_prediction":
            data = {"train": split.train, "test_pos": split.test_pos,
                    "test_neg": split.test_neg, "neg_ratio": c["train.task_neg_ratio"]}
        else:
            pairs = np.array(split.train, dtype=np.int64).reshape(-1, 2)
            data = {"pairs": pairs,
                    "targets": np.array([d["ratings"][tuple(p)] for p in pairs.tolist()])}
        return TaskHead(c["train.task"], data, d["graph"].node_count, seed=self.seed)

    def train(self) -> dict:
        return self._memoized("train", self._train)

    def _train(self) -> dict:
        g = self.envs()
        ops = self.operators()
        with self._stage("train"):
            params = ModelParams.init(g.feature_dim, self.model_config(), self.seed, ops)
            ckpt = self.path("checkpoint.bin")
            snaps_path = self.path("snapshots.bin")
            if self.reuse and ckpt.exists() and snaps_path.exists():
                state, _ = io.load_checkpoint(ckpt)
                params.load_state(state)
                snaps, _ = io.load_checkpoint(snaps_path)
                snapshots = sorted((int(k.split(".")[1]), v) for k, v in snaps.items())
                history = _read_history(self.path("loss_history.csv"))
                return {"params": params, "history": history, "snapshots": snapshots}
            trainer = Trainer(g, ops, params, self.train_config(), task=self.task_head())
            initial = trainer.embeddings()
            trainer.fit()
            snapshots = list(trainer.snapshots)
            if not snapshots or snapshots[0][0] != 0:
                snapshots.insert(0, (0, initial))
            io.save_checkpoint(ckpt, params.state(),
                               meta={"config_hash": config_hash(self.cfg), "seed": self.seed})
            io.save_checkpoint(snaps_path, {f"snapshot.{e}": v for e, v in snapshots},
                               meta={"kind": self.cfg["metrics.embedding"]})
            io.write_loss_history(self.path("loss_history.csv"), trainer.history)
            self._record("checkpoint.bin", "snapshots.bin", "loss_history.csv")
            if self.cfg["report.figures"]:
                from .plotting import plot_loss
                plot_loss(trainer.history, self.path("loss_curve.png"))
        return {"params": params, "history": trainer.history, "snapshots": snapshots}

    def embed(self) -> dict[str, np.ndarray]:
        return self._memoized("embed", self._embed)

    def _embed(self) -> dict[str, np.ndarray]:
        g = self.envs()
        params = self.train()["params"]
        with self._stage("embed"):
            es = embed(g.features, self.operators(), params)
            files = {"embeddings.csv": es.R_encode, "R_h.csv": es.R_h, "R_p.csv": es.R_p,
                     "R_star.csv": es.R_star}
            for name, mat in files.items():
                io.write_embeddings(self.path(name), mat)
            self._record(*files)
        return es.__dict__

    def metrics(self) -> dict:
        return self._memoized("metrics", self._metrics)

    def _metrics(self) -> dict:
        c = self.cfg
        g = self.envs()
        emb = self.embed()
        snapshots = self.train()["snapshots"]
        with self._stage("metrics"):
            final = representation(emb, c["metrics.embedding"])
            report = compute_report(final, g.hyperedges, g.pairwise_edges, g.node_count,
                                    rho=c["metrics.rho"], samples=c["metrics.samples"],
                                    entropy_mode=c["metrics.entropy_mode"], seed=self.seed,
                                    initial_emb=snapshots[0][1], snapshots=snapshots)
            payload = report.to_json()
            self.path("metrics.json").write_text(json.dumps(payload, indent=2, sort_keys=True)
                                                 + "\n", encoding="utf-8")
            self.path("group_entropy.tsv").write_text(report.entropy_table(), encoding="utf-8")
            with open(self.path("evolving.tsv"), "w", encoding="utf-8") as fh:
                fh.write("hyperedge\tstage\tcount\tratio\n")
                for row in payload["evolving"]:
                    fh.write(f"{row['hyperedge']}\t{row['stage']}\t{row['count']}\t"
                             f"{row['ratio']!r}\n")
            self._record("metrics.json", "group_entropy.tsv", "evolving.tsv")
            if c["report.figures"]:
                from .plotting import plot_evolving, plot_group_entropy
                plot_group_entropy(report.initial_entropies, report.group_entropies,
                                   self.path("group_entropy.png"))
                plot_evolving(report.evolving, self.path("evolving.png"))
        return payload

    def evaluate(self) -> dict:
        return self._memoized("eval", self._evaluate)

    def _evaluate(self) -> dict:
        c = self.cfg
        if c["train.task"] is None:
            return {}
        if not (self.reuse and self.path("embeddings.csv").exists()):
            self.embed()
        d = self.data()
        with self._stage("eval"):
            result = evaluate_embeddings(
                self.path("embeddings.csv"), c["train.task"], d, self.seed,
                c["train.task_neg_ratio"])
            result["mode"] = c["train.mode"]
            self.path("eval.json").write_text(json.dumps(result, indent=2, sort_keys=True)
                                              + "\n", encoding="utf-8")
            self._record("eval.json")
        return result

    def run(self) -> dict:
        with threadpool_limits(limits=1):
            self.metrics()
            self.evaluate()
        self.write_manifest()
        return self.manifest()


def evaluate_embeddings(path, task: str, data: dict, seed: int, neg_ratio: int = 5) -> dict:
    """Downstream evaluation reading an exported embedding file.

    Link prediction reports the raw inner-product AUC plus a logistic head
    trained on Hadamard products of training edges and sampled non-edges.
    """
    R = io.read_embeddings(path)
    split = data["split"]
    if task == "link_prediction":
        out = link_auc(R, split.test_pos, split.test_neg)
        train = np.array(split.train, dtype=np.int64).reshape(-1, 2)
        neg = sample_non_adjacent(R.shape[0], set(data["graph"].pairwise_edges),
                                  neg_ratio * len(train), stream(seed, "eval.head.neg"))
        feats = np.vstack([R[train[:, 0]] * R[train[:, 1]], R[neg[:, 0]] * R[neg[:, 1]]])
        labels = np.r_[np.ones(len(train)), np.zeros(len(neg))]
        head = LogisticRegression(max_iter=1000).fit(feats, labels)
        test = np.vstack([split.test_pos, split.test_neg])
        scores = head.decision_function(R[test[:, 0]] * R[test[:, 1]])
        truth = np.r_[np.ones(len(split.test_pos)), np.zeros(len(split.test_neg))]
        out["head_auc"] = float(roc_auc_score(truth, scores))
        return out
    ratings = data["ratings"]
    test = split.test_pos
    targets = np.array([ratings[(min(u, v), max(u, v))] for u, v in test.tolist()])
    pred = 1.0 / (1.0 + np.exp(-np.einsum("ij,ij->i", R[test[:, 0]], R[test[:, 1]])))
    err = pred - targets
    return {"mae": float(np.mean(np.abs(err))), "mse": float(np.mean(err ** 2)),
            "rmse": float(np.sqrt(np.mean(err ** 2))), "max_error": float(np.max(np.abs(err)))}


def _read_history(path: Path) -> list[dict]:
    import csv
    if not path.exists():
        return []
    with open(path, encoding="utf-8", newline="") as fh:
        return [{"epoch": int(r["epoch"]), "loss": float(r["loss"]),
                 "pos_term": float(r["pos_term"]), "neg_term": float(r["neg_term"])}
                for r in csv.DictReader(fh)]

"""Goal encoders and similarity measures for ranking alternative goals.

Four measures are supported: plain Euclidean distance on goal positions,
cosine similarity over a fixture embedding table, fuzzy matching through a
chat-completion service, and a trained intent-parameterized encoder scored
by L2 distance in embedding space.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DivergedLossError,
    KindMismatchError,
    MalformedReplyError,
    MissingEmbeddingError,
    UntrainedIntentError,
)
from .nets import Mlp, triplet_loss_and_grads
from .world import GoalValue

N_FEATURES = 20
FEATURE_NAMES = (
    "red", "green", "blue",
    "holds_liquid", "has_handle", "microwave_safe", "stemmed", "lidded",
    "formal", "pourable", "heat_safe", "stackable", "open_top",
    "mat_ceramic", "mat_glass", "mat_metal", "mat_plastic", "mat_porcelain",
    "mat_stoneware", "mat_other",
)


@dataclass(frozen=True)
class CatalogEntry:
    id: int
    name: str
    description: str
    features: np.ndarray  # (20,)
    gy: float             # mapped position on the goal line


@dataclass
class GoalCatalog:
    entries: list[CatalogEntry]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ConfigError("catalog names must be unique")
        for e in self.entries:
            if e.features.shape != (N_FEATURES,):
                raise ConfigError(f"{e.name}: expected {N_FEATURES} features")

    def __len__(self) -> int:
        return len(self.entries)

    def by_name(self, name: str) -> CatalogEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise ConfigError(f"no catalog entry named {name!r}")

    def ids(self) -> list[int]:
        return [e.id for e in self.entries]

    @staticmethod
    def from_dict(d: dict) -> "GoalCatalog":
        entries = []
        for i, e in enumerate(d["entries"]):
            feats = np.array([float(e["features"][k]) for k in FEATURE_NAMES])
            entries.append(CatalogEntry(int(e.get("id", i)), e["name"],
                                        e["description"], feats, float(e["gy"])))
        return GoalCatalog(entries)

    @staticmethod
    def load(path) -> "GoalCatalog":
        return GoalCatalog.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class IntentProfile:
    """A task context plus the simulated human's privileged feature weights."""

    id: str
    text: str
    weights: np.ndarray  # (20,), nonnegative

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.shape != (N_FEATURES,) or (w < 0).any() or not (w > 0).any():
            raise ConfigError(f"intent {self.id}: weights must be >= 0 with one positive")


def load_intents(path) -> dict[str, IntentProfile]:
    doc = json.loads(Path(path).read_text())
    out = {}
    for item in doc["intents"]:
        w = np.zeros(N_FEATURES)
        for k, v in item["weights"].items():
            w[FEATURE_NAMES.index(k)] = float(v)
        out[item["id"]] = IntentProfile(item["id"], item["text"], w)
    return out


def packaged_data_path(name: str) -> Path:
    return Path(resources.files("safealt").joinpath("data", name))


class EmbeddingTable:
    """Fixture embeddings keyed jointly by (goal id, intent id)."""

    def __init__(self, dim: int, entries: dict[tuple[int, str], np.ndarray]):
        self.dim = dim
        self.entries = entries
        for key, vec in entries.items():
            if vec.shape != (dim,):
                raise ConfigError(f"embedding {key} has dim {vec.shape}, expected {dim}")
            if not np.linalg.norm(vec) > 0:
                raise ConfigError(f"embedding {key} is the zero vector")

    def get(self, goal_id: int, intent_id: str) -> np.ndarray:
        try:
            return self.entries[(goal_id, intent_id)]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding for goal {goal_id} / intent {intent_id!r}")

    @staticmethod
    def from_dict(d: dict) -> "EmbeddingTable":
        entries = {}
        for key, vec in d["entries"].items():
            goal_part, intent_part = key.split("/", 1)
            entries[(int(goal_part), intent_part)] = np.array(vec, dtype=np.float64)
        return EmbeddingTable(int(d["dim"]), entries)

    @staticmethod
    def load(path) -> "EmbeddingTable":
        return EmbeddingTable.from_dict(json.loads(Path(path).read_text()))


# --- elementary measures -------------------------------------------------------


def d_euclidean(a: GoalValue, b: GoalValue, catalog: GoalCatalog | None = None) -> float:
    """|gy_a - gy_b| on the goal line; discrete goals map through the catalog."""
    if a.is_continuous != b.is_continuous:
        raise KindMismatchError("cannot mix continuous and discrete goal values")
    return abs(a.resolve(catalog) - b.resolve(catalog))


def d_cosine(table: EmbeddingTable, g: int, g_h: int, intent: str) -> float:
    """Cosine similarity in [-1, 1] between the two fixture embeddings."""
    va = table.get(g, intent)
    vb = table.get(g_h, intent)
    return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))


# --- SIRL encoder ---------------------------------------------------------------


@dataclass
class SirlTrainReport:
    epochs: int
    final_loss: float
    loss_history: list[float]


class SirlEncoder:
    """Per-intent feature encoders R^20 -> R^n trained from triplet choices.

    The default encoder is linear: the annotators' weighted feature metric is
    itself a linear projection, and a linear map generalizes to goal pairs the
    triplet protocol never constrains. Hidden layers remain available.
    """

    def __init__(self, embed_dim: int = 5, hidden=()):
        if embed_dim >= N_FEATURES:
            raise ConfigError("embedding must compress the feature space")
        self.embed_dim = embed_dim
        self.hidden = tuple(hidden)
        self.nets: dict[str, Mlp] = {}
        self.reports: dict[str, SirlTrainReport] = {}

    def embed(self, intent: str, features: np.ndarray) -> np.ndarray:
        if intent not in self.nets:
            raise UntrainedIntentError(f"encoder was never trained for intent {intent!r}")
        return self.nets[intent].predict(np.atleast_2d(features))

    def to_dict(self) -> dict:
        def fmt(v):
            return float(format(float(v), ".17g"))

        return {
            "format": "safealt-sirl/1",
            "embed_dim": self.embed_dim,
            "hidden": list(self.hidden),
            "intents": {
                intent: {
                    "layer_sizes": list(net.layer_sizes),
                    "seed": net.seed,
                    "weights": [[[fmt(v) for v in row] for row in w] for w in net.weights],
                    "biases": [[fmt(v) for v in b] for b in net.biases],
                    "final_loss": self.reports[intent].final_loss if intent in self.reports else None,
                }
                for intent, net in self.nets.items()
            },
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @staticmethod
    def from_dict(d: dict) -> "SirlEncoder":
        if d.get("format") != "safealt-sirl/1":
            raise ConfigError("unknown encoder document format")
        enc = SirlEncoder(int(d["embed_dim"]), tuple(d["hidden"]))
        for intent, doc in d["intents"].items():
            net = Mlp(doc["layer_sizes"], seed=int(doc.get("seed", 0)))
            net.weights = [np.array(w, dtype=np.float64) for w in doc["weights"]]
            net.biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
            enc.nets[intent] = net
        return enc

    @staticmethod
    def load(path) -> "SirlEncoder":
        return SirlEncoder.from_dict(json.loads(Path(path).read_text()))


def train_sirl(catalog: GoalCatalog, intent: IntentProfile, triplets,
               margin: float = 1.0, seed: int = 0, epochs: int = 200,
               lr: float = 5e-2, encoder: SirlEncoder | None = None) -> SirlEncoder:
    """Fit the intent's encoder by minimizing the symmetrized triplet loss.

    Triplets are (anchor, positive, negative) goal ids where the first two
    were judged most similar. Full-batch gradient descent with backtracking,
    so the recorded loss history is non-increasing by construction.
    """
    triplets = list(triplets)
    if not triplets:
        raise ConfigError("cannot train an encoder on zero triplets")
    enc = encoder or SirlEncoder()
    net = Mlp([N_FEATURES, *enc.hidden, enc.embed_dim], seed=seed)
    feats = {e.id: e.features for e in catalog.entries}
    fa = np.stack([feats[t[0]] for t in triplets])
    fp = np.stack([feats[t[1]] for t in triplets])
    fn = np.stack([feats[t[2]] for t in triplets])

    def loss_and_grad():
        ea, ca = net.forward(fa)
        ep, cp = net.forward(fp)
        en, cn = net.forward(fn)
        l1, ga1, gp1, gn1 = triplet_loss_and_grads(ea, ep, en, margin)
        # symmetrized: the positive also anchors against the same negative
        l2, gp2, ga2, gn2 = triplet_loss_and_grads(ep, ea, en, margin)
        scale = 1.0 / len(triplets)
        loss = (l1 + l2) * scale
        gw = None
        for cache, g in ((ca, (ga1 + ga2) * scale), (cp, (gp1 + gp2) * scale),
                         (cn, (gn1 + gn2) * scale)):
            w, b, _ = net.backward(cache, g)
            flat = Mlp.flatten_grads(w, b)
            gw = flat if gw is None else gw + flat
        return loss, gw

    history = []
    step = lr
    loss, grad = loss_and_grad()
    for _ in range(epochs):
        history.append(loss)
        if not np.isfinite(loss):
            raise DivergedLossError(f"triplet loss became {loss}")
        flat = net.get_flat()
        while True:
            net.set_flat(flat - step * grad)
            new_loss, new_grad = loss_and_grad()
            if new_loss <= loss or step < 1e-12:
                break
            net.set_flat(flat)
            step *= 0.5
        loss, grad = new_loss, new_grad
        step = min(step * 1.5, 1.0)
    history.append(loss)

    enc.nets[intent.id] = net
    enc.reports[intent.id] = SirlTrainReport(epochs, float(loss), history)
    return enc


def d_sirl(enc: SirlEncoder, catalog: GoalCatalog, g: int, g_h: int, intent: str) -> float:
    """L2 distance between the intent-specific embeddings of two goals."""
    fa = catalog.entries[g].features
    fb = catalog.entries[g_h].features
    return float(np.linalg.norm(enc.embed(intent, fa) - enc.embed(intent, fb)))


# --- LLM fuzzy matching ----------------------------------------------------------

PROMPT_TEMPLATE = (
    "The user intends to {intent}. Given {goal}, which item is the closest "
    "related to it?\nCandidates:\n{candidates}\n"
    "Reply with the candidate names ranked from most to least related, one "
    "name per line, using each candidate name exactly once."
)


class LlmRanker:
    """Asks a chat model for a full similarity ranking; replies are cached
    by request hash so identical queries hit the network once."""

    def __init__(self, client, model_label: str = ""):
        self.client = client
        self.model_label = model_label
        self._cache: dict[str, list[str]] = {}

    def rank(self, catalog: GoalCatalog, g_h: int, intent: IntentProfile,
             candidates: list[int]) -> list[int]:
        if not candidates:
            raise ConfigError("candidate list must be nonempty")
        names = [catalog.entries[c].name for c in candidates]
        prompt = PROMPT_TEMPLATE.format(
            intent=intent.text,
            goal=catalog.entries[g_h].description,
            candidates="\n".join(f"{i + 1}. {n}" for i, n in enumerate(names)),
        )
        key = hashlib.sha256((self.model_label + "\x00" + prompt).encode()).hexdigest()
        if key not in self._cache:
            reply = self.client.complete(prompt)
            self._cache[key] = self._parse(reply, names)
        by_name = {catalog.entries[c].name: c for c in candidates}
        return [by_name[n] for n in self._cache[key]]

    @staticmethod
    def _parse(reply: str, names: list[str]) -> list[str]:
        canonical = {n.lower(): n for n in names}
        out: list[str] = []
        for line in reply.splitlines():
            text = line.strip().lstrip("-*").strip()
            if not text:
                continue
            head, _, rest = text.partition(".")
            if head.strip().isdigit():
                text = rest.strip()
            match = canonical.get(text.lower())
            if match is None:
                raise MalformedReplyError(f"reply names unknown item {text!r}", reply)
            if match in out:
                raise MalformedReplyError(f"reply repeats item {match!r}", reply)
            out.append(match)
        if len(out) != len(names):
            raise MalformedReplyError(
                f"reply ranked {len(out)} of {len(names)} candidates", reply)
        return out


def d_llm(client, catalog: GoalCatalog, g_h: int, intent: IntentProfile,
          candidates: list[int]) -> list[int]:
    """Candidate ids ranked most-similar-first by the chat model."""
    return LlmRanker(client).rank(catalog, g_h, intent, candidates)


# --- measure objects used by the filter and the ranking harness -------------------


class EuclideanMeasure:
    name = "euclid"

    def distance(self, catalog: GoalCatalog, g: int, g_h: int, intent=None) -> float:
        return d_euclidean(GoalValue(goal_id=g), GoalValue(goal_id=g_h), catalog)


class CosineMeasure:
    name = "cosine"

    def __init__(self, table: EmbeddingTable):
        self.table = table

    def distance(self, catalog: GoalCatalog, g: int, g_h: int, intent=None) -> float:
        if intent is None:
            raise ConfigError("cosine measure needs an intent id")
        return 1.0 - d_cosine(self.table, g, g_h, intent)


class SirlMeasure:
    name = "sirl"

    def __init__(self, encoder: SirlEncoder):
        self.encoder = encoder

    def distance(self, catalog: GoalCatalog, g: int, g_h: int, intent=None) -> float:
        if intent is None:
            raise ConfigError("sirl measure needs an intent id")
        return d_sirl(self.encoder, catalog, g, g_h, intent)


class LlmMeasure:
    name = "llm"

    def __init__(self, client, intents: dict[str, IntentProfile]):
        self.ranker = LlmRanker(client)
        self.intents = intents

    def ranking(self, catalog: GoalCatalog, g_h: int, intent: str) -> list[int]:
        candidates = [e.id for e in catalog.entries if e.id != g_h]
        return self.ranker.rank(catalog, g_h, self.intents[intent], candidates)

    def distance(self, catalog: GoalCatalog, g: int, g_h: int, intent=None) -> float:
        if intent is None:
            raise ConfigError("llm measure needs an intent id")
        return float(self.ranking(catalog, g_h, intent).index(g))


def rank_alternatives(measure, catalog: GoalCatalog, g_h: int, intent=None) -> list[int]:
    """All other catalog goals sorted most-similar-first under the measure.

    Deterministic: exact distance ties fall back to catalog order. The LLM
    measure returns its ranked list verbatim.
    """
    others = [e.id for e in catalog.entries if e.id != g_h]
    if isinstance(measure, LlmMeasure):
        return measure.ranking(catalog, g_h, intent)
    dists = [(measure.distance(catalog, g, g_h, intent), i, g) for i, g in enumerate(others)]
    return [g for _, _, g in sorted(dists)]

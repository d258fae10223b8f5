"""Label decoding: trie-masked beam search over next-digit scorers.

A scorer assigns, for a query text and a label prefix, a probability to
each possible next symbol: another digit, or the end-of-sequence marker
``EOS`` that closes the label at a partition leaf.  The beam search
walks the partition's label trie in lockstep over prefix length,
keeping the ``beam_width`` most probable open prefixes and collecting
closed labels as they complete.

Two scorers ship with the package.  ``BaselineModel`` is a multinomial
naive Bayes classifier over partition leaves whose per-digit scores are
exact marginals of the leaf posterior, so beam search with a wide
enough beam reproduces the full posterior ranking.  ``ReplayScorer``
serves scores recorded by an external model from a file, keyed by text
hash and prefix, so models trained elsewhere can be decoded and
evaluated here without a network dependency.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import unicodedata
import weakref
from bisect import bisect_left
from collections import Counter, OrderedDict, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from . import labelcodec
from .dataset import LabeledRecord
from .partition import AdaptivePartition, partition_checksum

EOS = "$"

MODEL_FORMAT = "geocells.baseline/1"
TOKENIZER_ID = "lower-strip-punct/1"

DEFAULT_ALPHA = 1.0
DEFAULT_BEAM_WIDTH = 10
DEFAULT_TOP_K = 5

# Sorts just above every digit, so [prefix, prefix + _AFTER_PREFIX) is
# exactly the lexicographic range of labels extending prefix.
_AFTER_PREFIX = "\x7f"


class DecodeError(ValueError):
    """Bad model file, bad scores file, or invalid scorer output."""


@dataclass(frozen=True)
class Prediction:
    label: str
    probability: float


class SequenceScorer(Protocol):
    def score_next(self, text: str, prefix: str) -> Mapping[str, float]:
        """Probability of each next symbol (digit or EOS) given the prefix.

        Symbols may be omitted; omitted means probability zero.  Values
        must be finite and non-negative.
        """
        ...


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation.

    Punctuation is any character in a Unicode P* category.  Tokens that
    are empty after stripping are dropped.
    """
    tokens = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and unicodedata.category(raw[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(raw[end - 1]).startswith("P"):
            end -= 1
        if end > start:
            tokens.append(raw[start:end])
    return tokens


def hash_text(text: str) -> str:
    """Key used by external score files to refer to a query text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class LabelTrie:
    """Prefix structure of a set of labels.

    Because partition leaves form an antichain, a node is either a leaf
    or has children, never both; the beam search relies on that to
    treat leaves as terminal.
    """

    __slots__ = ("__weakref__", "_children", "_leaves")

    def __init__(self, labels: Iterable[str]):
        leaves = set()
        children: dict[str, set[str]] = defaultdict(set)
        for label in labels:
            labelcodec.decode(label)
            leaves.add(label)
            for k in range(len(label)):
                children[label[:k]].add(label[k])
        self._leaves = frozenset(leaves)
        self._children = {p: "".join(sorted(s)) for p, s in children.items()}

    def children(self, prefix: str) -> str:
        """Digits that extend prefix toward at least one label."""
        return self._children.get(prefix, "")

    def is_leaf(self, prefix: str) -> bool:
        return prefix in self._leaves

    def __len__(self) -> int:
        return len(self._leaves)


_TRIE_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def trie_for(partition: AdaptivePartition) -> LabelTrie:
    """Label trie for a partition, cached per partition object."""
    trie = _TRIE_CACHE.get(partition)
    if trie is None:
        trie = LabelTrie(partition.leaf_labels())
        _TRIE_CACHE[partition] = trie
    return trie


class BaselineModel:
    """Multinomial naive Bayes over partition leaves.

    The leaf prior is proportional to the leaf's training record count;
    leaves with no records keep probability exactly zero.  Token
    likelihoods use add-alpha smoothing over the training vocabulary,
    and unknown query tokens contribute the smoothing mass only.

    ``score_next`` returns exact digit marginals of the leaf posterior:
    the probability of digit d after prefix p is the posterior mass of
    leaves under p + d divided by the mass under p, and EOS at a leaf
    closes the remaining mass.  When the prefix has zero posterior mass
    (possible only for prefixes the beam search never reaches) the
    scorer falls back to a uniform distribution over the symbols that
    exist in the label set.
    """

    _CACHE_SIZE = 64

    def __init__(
        self,
        partition: AdaptivePartition,
        record_counts: Mapping[str, int],
        token_counts: Mapping[str, Mapping[str, int]],
        alpha: float = DEFAULT_ALPHA,
    ):
        if not (isinstance(alpha, (int, float)) and math.isfinite(alpha) and alpha > 0):
            raise DecodeError(f"alpha must be a finite positive number, got {alpha!r}")
        self.partition = partition
        self.alpha = float(alpha)
        self.tokenizer = TOKENIZER_ID
        self.partition_checksum = partition_checksum(partition)

        labels = partition.leaf_labels()
        index = {label: i for i, label in enumerate(labels)}
        for label in record_counts:
            if label not in index:
                raise DecodeError(f"record count for non-leaf label {label!r}")
        for label in token_counts:
            if label not in index:
                raise DecodeError(f"token counts for non-leaf label {label!r}")

        self.record_counts = {
            label: int(record_counts.get(label, 0)) for label in labels
        }
        if any(c < 0 for c in self.record_counts.values()):
            raise DecodeError("record counts must be non-negative")
        if sum(self.record_counts.values()) == 0:
            raise DecodeError("model has no training records")
        self.token_counts = {
            label: dict(counts) for label, counts in token_counts.items() if counts
        }
        for label, counts in self.token_counts.items():
            for token, count in counts.items():
                if not isinstance(count, int) or count <= 0:
                    raise DecodeError(
                        f"token count for {token!r} in leaf {label!r} must be a"
                        f" positive integer, got {count!r}"
                    )

        self._labels = labels
        vocabulary = set()
        for counts in self.token_counts.values():
            vocabulary.update(counts)
        self.vocabulary = sorted(vocabulary)
        v_size = len(self.vocabulary)

        n = len(labels)
        priors = np.zeros(n)
        for label, count in self.record_counts.items():
            priors[index[label]] = count
        self._log_prior = np.full(n, -np.inf)
        nonzero = priors > 0
        self._log_prior[nonzero] = np.log(priors[nonzero])

        token_totals = np.zeros(n)
        postings: dict[str, tuple[list[int], list[float]]] = defaultdict(
            lambda: ([], [])
        )
        for label, counts in self.token_counts.items():
            i = index[label]
            token_totals[i] = sum(counts.values())
            for token, count in counts.items():
                idx, delta = postings[token]
                idx.append(i)
                delta.append(math.log(count + self.alpha) - math.log(self.alpha))
        self._log_denom = np.log(token_totals + self.alpha * max(v_size, 1))
        self._postings = {
            token: (np.asarray(idx, dtype=np.intp), np.asarray(delta))
            for token, (idx, delta) in postings.items()
        }
        self._cache: OrderedDict[str, tuple[np.ndarray, np.ndarray]] = OrderedDict()

    def posterior(self, text: str) -> dict[str, float]:
        """Leaf posterior as a label-to-probability mapping."""
        post, _ = self._posterior(text)
        return {label: float(p) for label, p in zip(self._labels, post)}

    def _posterior(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        cached = self._cache.get(text)
        if cached is not None:
            self._cache.move_to_end(text)
            return cached
        scores = self._log_prior.copy()
        tokens = tokenize(text)
        if tokens and self.vocabulary:
            # Per token: log((count + alpha) / (total + alpha * V)).  The
            # count term is folded in sparsely; the constant T * log(alpha)
            # cancels in the softmax.
            scores -= len(tokens) * self._log_denom
            for token, mult in Counter(tokens).items():
                posting = self._postings.get(token)
                if posting is not None:
                    idx, delta = posting
                    scores[idx] += mult * delta
        finite = scores > -np.inf
        post = np.zeros(len(scores))
        shifted = scores[finite] - scores[finite].max()
        post[finite] = np.exp(shifted)
        post /= post.sum()
        cum = np.concatenate(([0.0], np.cumsum(post)))
        self._cache[text] = (post, cum)
        if len(self._cache) > self._CACHE_SIZE:
            self._cache.popitem(last=False)
        return post, cum

    def _range(self, prefix: str) -> tuple[int, int]:
        lo = bisect_left(self._labels, prefix)
        hi = bisect_left(self._labels, prefix + _AFTER_PREFIX, lo=lo)
        return lo, hi

    def score_next(self, text: str, prefix: str) -> dict[str, float]:
        if prefix and not labelcodec.is_valid(prefix):
            raise labelcodec.InvalidLabel("non-digit", f"invalid prefix {prefix!r}")
        post, cum = self._posterior(text)
        lo, hi = self._range(prefix)
        total = cum[hi] - cum[lo]

        symbols: list[tuple[str, float]] = []
        if lo < hi and self._labels[lo] == prefix:
            symbols.append((EOS, float(post[lo])))
        digits = labelcodec.FACE_DIGITS if not prefix else labelcodec.CHILD_DIGITS
        for digit in digits:
            sub_lo, sub_hi = self._range(prefix + digit)
            if sub_lo < sub_hi:
                symbols.append((digit, float(cum[sub_hi] - cum[sub_lo])))

        if not symbols:
            return {}
        if total <= 0.0:
            return {sym: 1.0 / len(symbols) for sym, _ in symbols}
        return {sym: mass / total for sym, mass in symbols}


def train_baseline(
    records: Iterable[LabeledRecord],
    partition: AdaptivePartition,
    alpha: float = DEFAULT_ALPHA,
) -> BaselineModel:
    """Count tokens per leaf and build the naive Bayes model."""
    record_counts: Counter = Counter()
    token_counts: dict[str, Counter] = defaultdict(Counter)
    seen = 0
    leaf_set = set(partition.leaf_labels())
    for rec in records:
        seen += 1
        if rec.label not in leaf_set:
            raise DecodeError(
                f"record {rec.id!r} has label {rec.label!r} which is not a"
                " leaf of the partition"
            )
        record_counts[rec.label] += 1
        token_counts[rec.label].update(tokenize(rec.text))
    if seen == 0:
        raise DecodeError("no training records")
    return BaselineModel(partition, record_counts, token_counts, alpha=alpha)


def save_baseline(model: BaselineModel, path: str | os.PathLike) -> None:
    """Write the model as deterministic JSON, atomically."""
    doc = {
        "format": MODEL_FORMAT,
        "alpha": model.alpha,
        "tokenizer": model.tokenizer,
        "partition_checksum": model.partition_checksum,
        "record_counts": {
            label: count for label, count in model.record_counts.items() if count
        },
        "token_counts": model.token_counts,
        "vocabulary": model.vocabulary,
    }
    data = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_baseline(path: str | os.PathLike, partition: AdaptivePartition) -> BaselineModel:
    """Load a model and bind it to the partition it was trained on.

    Refuses to load if the stored partition checksum does not match, so
    a model can never be paired with a label space it was not trained
    for.
    """
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DecodeError(f"cannot read model file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DecodeError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DecodeError("model file must contain a JSON object")
    if doc.get("format") != MODEL_FORMAT:
        raise DecodeError(
            f"unsupported model format {doc.get('format')!r},"
            f" expected {MODEL_FORMAT!r}"
        )
    if doc.get("tokenizer") != TOKENIZER_ID:
        raise DecodeError(f"unsupported tokenizer {doc.get('tokenizer')!r}")
    expected = partition_checksum(partition)
    stored = doc.get("partition_checksum")
    if stored != expected:
        raise DecodeError(
            f"model was trained on partition {stored!r} but the supplied"
            f" partition has checksum {expected!r}"
        )
    record_counts = doc.get("record_counts")
    token_counts = doc.get("token_counts")
    if not isinstance(record_counts, dict) or not isinstance(token_counts, dict):
        raise DecodeError("model file is missing count tables")
    try:
        model = BaselineModel(
            partition, record_counts, token_counts, alpha=doc.get("alpha", DEFAULT_ALPHA)
        )
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"bad model file: {exc}") from exc
    stored_vocab = doc.get("vocabulary")
    if stored_vocab != model.vocabulary:
        raise DecodeError("model vocabulary does not match its token counts")
    return model


def load_scorer(
    path: str | os.PathLike, partition: AdaptivePartition
) -> tuple["SequenceScorer", str]:
    """Load either scorer kind from a file, sniffing which it is.

    A baseline model file is a single JSON object with a "format" key;
    an external scores file is JSONL whose rows carry text_hash and
    prefix.  Returns (scorer, kind) with kind "baseline" or "replay".
    """
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise DecodeError(f"cannot read model file: {exc}") from exc
    try:
        head = json.loads(first) if first.strip() else None
    except json.JSONDecodeError:
        head = None
    if isinstance(head, dict) and "format" in head:
        return load_baseline(path, partition), "baseline"
    if isinstance(head, dict) and {"text_hash", "prefix"} <= head.keys():
        return ReplayScorer(import_external_scores(path)), "replay"
    raise DecodeError(
        f"cannot tell what kind of model {os.fspath(path)!r} is; expected"
        " a baseline model file or an external scores file"
    )


class ReplayScorer:
    """Serves next-symbol scores recorded by an external model.

    Lookups are keyed by (text hash, prefix).  A miss returns no
    symbols, which prunes that branch of the search; ``misses`` counts
    them so callers can tell an incomplete score file from a clean run.
    """

    def __init__(self, table: Mapping[tuple[str, str], Mapping[str, float]]):
        self._table = dict(table)
        self.misses = 0

    def score_next(self, text: str, prefix: str) -> Mapping[str, float]:
        scores = self._table.get((hash_text(text), prefix))
        if scores is None:
            self.misses += 1
            return {}
        return scores


def import_external_scores(path: str | os.PathLike) -> dict[tuple[str, str], dict[str, float]]:
    """Read a JSONL score file into a replay table.

    Each line is {"text_hash": ..., "prefix": ..., "scores": {symbol:
    probability}} where symbols are label digits or EOS.
    """
    table: dict[tuple[str, str], dict[str, float]] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DecodeError(f"cannot read scores file: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{os.fspath(path)}:{lineno}"
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DecodeError(f"{where}: invalid JSON: {exc}") from exc
            if not isinstance(doc, dict):
                raise DecodeError(f"{where}: expected an object")
            text_hash = doc.get("text_hash")
            prefix = doc.get("prefix")
            scores = doc.get("scores")
            if not isinstance(text_hash, str) or not text_hash:
                raise DecodeError(f"{where}: missing text_hash")
            if not isinstance(prefix, str):
                raise DecodeError(f"{where}: missing prefix")
            if prefix and not labelcodec.is_valid(prefix):
                raise DecodeError(f"{where}: invalid prefix {prefix!r}")
            if not isinstance(scores, dict):
                raise DecodeError(f"{where}: missing scores")
            clean: dict[str, float] = {}
            for symbol, prob in scores.items():
                if symbol != EOS and symbol not in labelcodec.FACE_DIGITS:
                    raise DecodeError(f"{where}: invalid symbol {symbol!r}")
                if not isinstance(prob, (int, float)) or not math.isfinite(prob) or prob < 0:
                    raise DecodeError(
                        f"{where}: probability for {symbol!r} must be finite"
                        f" and non-negative, got {prob!r}"
                    )
                clean[symbol] = float(prob)
            key = (text_hash, prefix)
            if key in table:
                raise DecodeError(f"{where}: duplicate entry for {key!r}")
            table[key] = clean
    return table


def beam_search(
    scorer: SequenceScorer,
    text: str,
    trie: LabelTrie,
    beam_width: int = DEFAULT_BEAM_WIDTH,
    top_k: int = DEFAULT_TOP_K,
) -> list[Prediction]:
    """Top-k most probable leaf labels under the scorer.

    Hypotheses advance in lockstep over prefix length; at each step the
    ``beam_width`` most probable open prefixes survive.  A hypothesis
    completes only when EOS is taken at a trie leaf, and its final
    probability is the product of the symbol probabilities along its
    path.  Zero-probability continuations are dropped.  Ties sort by
    label so results are deterministic.
    """
    if not (isinstance(beam_width, int) and beam_width >= 1):
        raise DecodeError(f"beam_width must be a positive integer, got {beam_width!r}")
    if not (isinstance(top_k, int) and top_k >= 1):
        raise DecodeError(f"top_k must be a positive integer, got {top_k!r}")

    beams: list[tuple[str, float]] = [("", 1.0)]
    completed: list[tuple[str, float]] = []
    while beams:
        candidates: list[tuple[str, float]] = []
        for prefix, prob in beams:
            scores = scorer.score_next(text, prefix)
            if trie.is_leaf(prefix):
                p_eos = _checked(scores.get(EOS, 0.0), EOS, prefix)
                if p_eos > 0.0:
                    completed.append((prefix, prob * p_eos))
            for digit in trie.children(prefix):
                p = _checked(scores.get(digit, 0.0), digit, prefix)
                if p > 0.0:
                    candidates.append((prefix + digit, prob * p))
        candidates.sort(key=lambda item: (-item[1], item[0]))
        beams = candidates[:beam_width]
    completed.sort(key=lambda item: (-item[1], item[0]))
    return [Prediction(label, prob) for label, prob in completed[:top_k]]


def _checked(prob: float, symbol: str, prefix: str) -> float:
    if not isinstance(prob, (int, float)) or not math.isfinite(prob) or prob < 0:
        raise DecodeError(
            f"scorer returned invalid probability {prob!r} for symbol"
            f" {symbol!r} after prefix {prefix!r}"
        )
    return float(prob)


def write_predictions(
    path: str | os.PathLike,
    rows: Iterable[tuple[str, Sequence[Prediction]]],
) -> None:
    """Write (record id, ranked predictions) rows as JSONL, atomically."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for record_id, predictions in rows:
                doc = {
                    "id": record_id,
                    "predictions": [
                        {"label": p.label, "probability": p.probability}
                        for p in predictions
                    ],
                }
                fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_predictions(path: str | os.PathLike) -> dict[str, list[Prediction]]:
    """Read a predictions JSONL file into an id-to-ranking mapping."""
    out: dict[str, list[Prediction]] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DecodeError(f"cannot read predictions file: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{os.fspath(path)}:{lineno}"
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DecodeError(f"{where}: invalid JSON: {exc}") from exc
            record_id = doc.get("id") if isinstance(doc, dict) else None
            predictions = doc.get("predictions") if isinstance(doc, dict) else None
            if not isinstance(record_id, str) or not isinstance(predictions, list):
                raise DecodeError(f"{where}: expected id and predictions fields")
            if record_id in out:
                raise DecodeError(f"{where}: duplicate id {record_id!r}")
            ranked = []
            for item in predictions:
                if (
                    not isinstance(item, dict)
                    or not isinstance(item.get("label"), str)
                    or not isinstance(item.get("probability"), (int, float))
                ):
                    raise DecodeError(f"{where}: malformed prediction entry")
                ranked.append(Prediction(item["label"], float(item["probability"])))
            out[record_id] = ranked
    return out

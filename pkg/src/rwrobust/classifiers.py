"""Black-box classifiers: analytic rules, trainable built-ins, external models.

Every classifier exposes ``predict(X) -> labels`` where ``X`` is a
``(k, n_features)`` array and the result is one label token per row, in
order.  Tokens are strings without whitespace, commas, or newlines; in
regression mode they must parse as decimal numbers.  ``predict`` must be
deterministic: the same batch always yields the same labels.

Built-in classifiers are immutable and freely shareable across workers.
An :class:`ExternalClassifier` owns one child process; concurrent use
requires one handle per worker.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ExternalModelError, InvariantViolation, LayoutError

_FORBIDDEN = set(" \t\r\n,")


def validate_label_token(token: str) -> str:
    """Check the label-token rule: nonempty, no whitespace, commas, newlines."""
    if not token or any(ch in _FORBIDDEN for ch in token):
        raise InvariantViolation(f"invalid label token {token!r}")
    return token


def _as_batch(x, n_features=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise LayoutError(f"batch must be 2-D, got shape {x.shape}")
    if n_features is not None and x.shape[1] != n_features:
        raise LayoutError(f"expected {n_features} features, got {x.shape[1]}")
    return x


@dataclass(frozen=True)
class LinearClassifier:
    """Linear rule: predicts "1" iff w . x + b > 1/2, else "0".

    Points exactly on the decision boundary (w . x + b == 1/2) get "0".
    """

    w: tuple[float, ...]
    b: float = 0.0

    def __post_init__(self):
        w = tuple(float(v) for v in np.atleast_1d(np.asarray(self.w, dtype=float)))
        if not any(v != 0.0 for v in w):
            raise InvariantViolation("weight vector must be nonzero")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def n_features(self) -> int:
        return len(self.w)

    def predict(self, x) -> np.ndarray:
        x = _as_batch(x, self.n_features)
        score = x @ np.asarray(self.w) + self.b
        return np.where(score > 0.5, "1", "0")


@dataclass(frozen=True)
class CornerClassifier:
    """Right-angle rule: predicts "1" iff x[i] > a1 and x[j] > a2, else "0"."""

    a1: float
    a2: float
    idx: tuple[int, int] = (0, 1)

    def __post_init__(self):
        i, j = (int(v) for v in self.idx)
        if i == j or i < 0 or j < 0:
            raise InvariantViolation("corner needs two distinct feature indices")
        object.__setattr__(self, "idx", (i, j))

    @property
    def n_features(self) -> int:
        return max(self.idx) + 1

    def predict(self, x) -> np.ndarray:
        x = _as_batch(x)
        if x.shape[1] <= max(self.idx):
            raise LayoutError(f"batch has {x.shape[1]} features, need {self.n_features}")
        hit = (x[:, self.idx[0]] > self.a1) & (x[:, self.idx[1]] > self.a2)
        return np.where(hit, "1", "0")


@dataclass(frozen=True)
class ConstantClassifier:
    """Predicts the same label for every input (no decision boundary)."""

    label: str = "0"

    def __post_init__(self):
        validate_label_token(self.label)

    def predict(self, x) -> np.ndarray:
        x = _as_batch(x)
        return np.full(x.shape[0], self.label, dtype=object)


class KnnClassifier:
    """k-nearest-neighbors with Euclidean distance and majority vote.

    k must be odd and no larger than the number of reference points.
    Vote ties are broken toward the lexicographically smaller token;
    distance ties are broken by reference-point order.
    """

    def __init__(self, k, x, y):
        x = _as_batch(x)
        y = np.asarray([validate_label_token(str(t)) for t in y], dtype=object)
        if len(y) != x.shape[0]:
            raise LayoutError("reference points and labels differ in length")
        k = int(k)
        if k < 1 or k % 2 == 0:
            raise InvariantViolation(f"k must be odd and positive, got {k}")
        if k > x.shape[0]:
            raise InvariantViolation(f"k={k} exceeds {x.shape[0]} reference points")
        self.k = k
        self._x = x.copy()
        self._y = y
        self._x.setflags(write=False)
        self._y.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self._x.shape[1]

    def predict(self, x) -> np.ndarray:
        x = _as_batch(x, self.n_features)
        d2 = (
            np.square(x).sum(axis=1)[:, None]
            - 2.0 * x @ self._x.T
            + np.square(self._x).sum(axis=1)[None, :]
        )
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        out = np.empty(x.shape[0], dtype=object)
        for i, idx in enumerate(nearest):
            votes = Counter(self._y[idx])
            top = max(votes.values())
            out[i] = min(t for t, c in votes.items() if c == top)
        return out


class DecisionTreeClassifier:
    """Axis-aligned CART tree grown by greedy Gini-impurity splitting.

    Split thresholds are midpoints of adjacent observed feature values;
    leaves predict their majority label with ties broken toward the
    lexicographically smaller token.  ``constant`` is true when the tree
    degenerated to depth 0 because the training data had a single class.
    """

    def __init__(self, max_depth, root, n_features, constant=False):
        if max_depth < 1:
            raise InvariantViolation(f"max_depth must be >= 1, got {max_depth}")
        self.max_depth = int(max_depth)
        self.root = root
        self.n_features = int(n_features)
        self.constant = bool(constant)

    def predict(self, x) -> np.ndarray:
        x = _as_batch(x, self.n_features)
        out = np.empty(x.shape[0], dtype=object)
        self._fill(self.root, x, np.arange(x.shape[0]), out)
        return out

    def _fill(self, node, x, idx, out):
        if idx.size == 0:
            return
        if node["leaf"]:
            out[idx] = node["label"]
            return
        left = x[idx, node["feature"]] <= node["threshold"]
        self._fill(node["left"], x, idx[left], out)
        self._fill(node["right"], x, idx[~left], out)

    def depth(self) -> int:
        def _d(node):
            if node["leaf"]:
                return 0
            return 1 + max(_d(node["left"]), _d(node["right"]))

        return _d(self.root)

    def to_json(self) -> str:
        return json.dumps(
            {
                "max_depth": self.max_depth,
                "n_features": self.n_features,
                "constant": self.constant,
                "root": self.root,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> DecisionTreeClassifier:
        raw = json.loads(text)
        return cls(raw["max_depth"], raw["root"], raw["n_features"], raw["constant"])


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.square(p).sum())


def _majority(labels: np.ndarray) -> str:
    votes = Counter(labels)
    top = max(votes.values())
    return min(t for t, c in votes.items() if c == top)


def _grow(x, y, depth, max_depth):
    classes = np.unique(y.astype(str))
    if depth >= max_depth or classes.size == 1:
        return {"leaf": True, "label": _majority(y)}

    best = None  # (impurity, feature, threshold)
    n = y.shape[0]
    _, y_codes = np.unique(y.astype(str), return_inverse=True)
    n_classes = y_codes.max() + 1
    total_counts = np.bincount(y_codes, minlength=n_classes)
    parent = _gini(total_counts)
    for feat in range(x.shape[1]):
        order = np.argsort(x[:, feat], kind="stable")
        xs = x[order, feat]
        ys = y_codes[order]
        left = np.zeros(n_classes, dtype=int)
        for cut in range(1, n):
            left[ys[cut - 1]] += 1
            if xs[cut] == xs[cut - 1]:
                continue
            right = total_counts - left
            impurity = (cut / n) * _gini(left) + ((n - cut) / n) * _gini(right)
            if impurity < parent - 1e-12 and (best is None or impurity < best[0] - 1e-12):
                best = (impurity, feat, (xs[cut - 1] + xs[cut]) / 2.0)
    if best is None:
        return {"leaf": True, "label": _majority(y)}

    _, feat, threshold = best
    mask = x[:, feat] <= threshold
    return {
        "leaf": False,
        "feature": int(feat),
        "threshold": float(threshold),
        "left": _grow(x[mask], y[mask], depth + 1, max_depth),
        "right": _grow(x[~mask], y[~mask], depth + 1, max_depth),
    }


def fit_tree(data, max_depth: int, stream=None) -> DecisionTreeClassifier:
    """Fit a depth-limited CART tree on a dataset (or an (X, y) pair).

    Splitting is fully deterministic (features scanned in order, first best
    split kept), so ``stream`` is accepted for signature symmetry with the
    other fitting entry points but not consumed.  Single-class data yields
    a depth-0 constant tree, flagged via ``constant``.
    """
    if hasattr(data, "features"):
        x, y = data.features, data.labels
    else:
        x, y = data
    x = _as_batch(x)
    y = np.asarray([validate_label_token(str(t)) for t in y], dtype=object)
    if x.shape[0] != y.shape[0]:
        raise LayoutError("features and labels differ in length")
    if x.shape[0] < 2:
        raise InvariantViolation("need at least 2 samples to fit a tree")

    if np.unique(y.astype(str)).size == 1:
        root = {"leaf": True, "label": str(y[0])}
        return DecisionTreeClassifier(max_depth, root, x.shape[1], constant=True)
    root = _grow(x, y, 0, max_depth)
    return DecisionTreeClassifier(max_depth, root, x.shape[1])


_EOF = object()


class ExternalClassifier:
    """Client for a model served by a child process over a line protocol.

    Protocol (bit-exact): the parent writes one sample per line, features
    as decimal numbers joined by commas, each line terminated by ``\\n``,
    then flushes; the child writes exactly one label token per input line,
    in order, each terminated by ``\\n``, and flushes after each batch.
    No handshake, no headers, ASCII/UTF-8.

    One handle owns one child process; requests on a handle are serialized
    by an internal lock.  For parallel estimation spawn one handle per
    worker.
    """

    def __init__(self, command, n_features, timeout=30.0, batch_size=1024):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.n_features = int(n_features)
        self.timeout = float(timeout)
        self.batch_size = int(batch_size)
        if self.n_features < 1 or self.batch_size < 1 or self.timeout <= 0:
            raise InvariantViolation("bad external-classifier parameters")
        self._lock = threading.Lock()
        self._line_no = 0
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ExternalModelError(f"cannot launch {self.command}: {exc}") from exc
        self._replies: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._drain, daemon=True)
        self._reader.start()

    def _drain(self):
        try:
            for line in self._proc.stdout:
                self._replies.put(line)
        finally:
            self._replies.put(_EOF)

    def predict(self, x) -> np.ndarray:
        x = _as_batch(x, self.n_features)
        tokens = []
        with self._lock:
            for start in range(0, x.shape[0], self.batch_size):
                chunk = x[start : start + self.batch_size]
                self._send(chunk)
                for _ in range(chunk.shape[0]):
                    tokens.append(self._recv())
        return np.array(tokens, dtype=object)

    def _send(self, chunk):
        lines = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in chunk)
        try:
            self._proc.stdin.write(lines)
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ExternalModelError(
                f"external model closed its input: {exc}", self._line_no + 1
            ) from exc

    def _recv(self) -> str:
        self._line_no += 1
        try:
            reply = self._replies.get(timeout=self.timeout)
        except queue.Empty:
            raise ExternalModelError(
                f"no reply within {self.timeout:g} s", self._line_no
            ) from None
        if reply is _EOF:
            code = self._proc.poll()
            raise ExternalModelError(
                f"external model exited (status {code}) before replying",
                self._line_no,
            )
        token = reply.rstrip("\n")
        try:
            return validate_label_token(token)
        except InvariantViolation as exc:
            raise ExternalModelError(f"malformed reply {token!r}", self._line_no) from exc

    def self_test(self, x) -> None:
        """Double-query determinism check; raises if the two replies differ.

        The protocol requires external models to be deterministic; this is
        the built-in detector for violations.
        """
        first = self.predict(x)
        second = self.predict(x)
        if not np.array_equal(first, second):
            bad = int(np.nonzero(first != second)[0][0])
            raise ExternalModelError(
                f"nondeterministic external model: sample {bad} got "
                f"{first[bad]!r} then {second[bad]!r}"
            )

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=5.0)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

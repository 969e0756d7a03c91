"""Token-probability sources and the grammar-constrained sampling loop.

Two sources ship with the toolkit: an add-k smoothed n-gram model with
backoff, and a line-protocol bridge to an external process (for models that
live outside this package). A memorising oracle, which replays stored
sequences, is used to calibrate the memorisation metric.
"""

from __future__ import annotations

import enum
import json
import shlex
import subprocess
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from . import vocab as V
from .errors import ConfigurationError, ProtocolError, SessionError
from .grammar import GrammarDecoder, mask_to_ids
from .sequence import MAX_LENGTH, CircuitSequence

HANDSHAKE = "HELLO topobi-lm 1"


class TokenModel(Protocol):
    vocab: V.Vocabulary

    def next_logits(self, history: Sequence[int], mask: np.ndarray) -> np.ndarray:
        """Unnormalised log-scores over the vocabulary for the next token."""


class NGramModel:
    """Add-k smoothed n-gram model backing off to the longest seen context.

    For a context ``c`` seen in training, ``P(w | c) = (n(c, w) + k) / (n(c) + k|V|)``;
    unseen contexts drop their oldest token until a seen one (at worst the
    empty context) is found.
    """

    def __init__(self, vocab: V.Vocabulary, order: int = 4, k: float = 0.1,
                 counts: dict[tuple[int, ...], dict[int, int]] | None = None):
        if order < 1:
            raise ConfigurationError("n-gram order must be >= 1")
        if not k > 0:
            raise ConfigurationError("smoothing constant k must be > 0")
        self.vocab = vocab
        self.order = order
        self.k = float(k)
        self.counts: dict[tuple[int, ...], dict[int, int]] = counts or {}
        self._totals = {c: sum(t.values()) for c, t in self.counts.items()}
        self._dist = lru_cache(maxsize=65536)(self._distribution)
        self._logdist = lru_cache(maxsize=65536)(self._log_distribution)

    def __getstate__(self) -> dict:
        state = dict(self.__dict__)
        del state["_dist"], state["_logdist"]
        return state

    def __setstate__(self, state: dict) -> None:
        self.__dict__.update(state)
        self._dist = lru_cache(maxsize=65536)(self._distribution)
        self._logdist = lru_cache(maxsize=65536)(self._log_distribution)

    def _distribution(self, ctx: tuple[int, ...]) -> np.ndarray:
        table = self.counts[ctx]
        p = np.full(len(self.vocab), self.k)
        for tid, n in table.items():
            p[tid] += n
        p /= self._totals[ctx] + self.k * len(self.vocab)
        return p

    def _log_distribution(self, ctx: tuple[int, ...]) -> np.ndarray:
        return np.log(self._dist(ctx))

    def context_for(self, history: Sequence[int]) -> tuple[int, ...]:
        for length in range(min(self.order - 1, len(history)), -1, -1):
            ctx = tuple(history[len(history) - length:]) if length else ()
            if ctx in self.counts:
                return ctx
        return ()

    def _context(self, history: Sequence[int] | Sequence[str]) -> tuple[int, ...] | None:
        tail = history[max(0, len(history) - self.order + 1):] if self.order > 1 else []
        ctx = self.context_for([self.vocab.id(t) if isinstance(t, str) else int(t) for t in tail])
        return ctx if ctx in self.counts else None  # None: untrained model

    def next_distribution(self, history: Sequence[int] | Sequence[str]) -> np.ndarray:
        ctx = self._context(history)
        if ctx is None:
            return np.full(len(self.vocab), 1.0 / len(self.vocab))
        return self._dist(ctx)

    def next_logits(self, history: Sequence[int], mask: np.ndarray | None = None) -> np.ndarray:
        ctx = self._context(history)
        if ctx is None:
            return np.zeros(len(self.vocab))
        return self._logdist(ctx)

    def to_json(self, provenance: str = "") -> str:
        payload = {
            "provenance": provenance,
            "order": self.order,
            "k": self.k,
            "device_limits": dict(self.vocab.device_limits),
            "net_limits": dict(self.vocab.net_limits),
            "counts": {
                " ".join(self.vocab.text(i) for i in ctx): {self.vocab.text(t): n for t, n in sorted(tab.items())}
                for ctx, tab in sorted(self.counts.items())
            },
        }
        return json.dumps(payload, sort_keys=True, indent=0) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "NGramModel":
        data = json.loads(text)
        vocab = V.build_vocabulary(data["device_limits"], data["net_limits"])
        counts = {
            tuple(vocab.id(t) for t in ctx.split()): {vocab.id(t): n for t, n in tab.items()}
            for ctx, tab in data["counts"].items()
        }
        return cls(vocab, data["order"], data["k"], counts)

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        return cls.from_json(Path(path).read_text())


def train_ngram(dataset: Iterable[CircuitSequence | Sequence[str]], order: int = 4, k: float = 0.1,
                vocab: V.Vocabulary | None = None) -> NGramModel:
    """Count every n-gram up to ``order`` over unpadded sequences.

    Each sequence contributes one trailing ``TRUNCATE`` so the model learns
    where circuits end.
    """
    vocab = vocab or V.default_vocabulary()
    model = NGramModel(vocab, order, k)
    counts: dict[tuple[int, ...], dict[int, int]] = {}
    n_seq = 0
    for seq in dataset:
        toks = seq.tokens if isinstance(seq, CircuitSequence) else [t for t in seq if t != V.TRUNCATE]
        ids = vocab.encode(toks) + [vocab.truncate_id]
        n_seq += 1
        for i, tid in enumerate(ids):
            for length in range(0, min(order - 1, i) + 1):
                ctx = tuple(ids[i - length:i])
                tab = counts.setdefault(ctx, {})
                tab[tid] = tab.get(tid, 0) + 1
    if not n_seq:
        raise ConfigurationError("cannot train on an empty dataset")
    return NGramModel(vocab, order, k, counts)


class MemorizingModel:
    """Oracle that puts all mass on the continuation of a stored sequence.

    Sequences are kept in a prefix trie; when several share a prefix the one
    stored first wins. Histories that leave the trie get uniform scores.
    """

    def __init__(self, sequences: Iterable[CircuitSequence], vocab: V.Vocabulary | None = None):
        self.vocab = vocab or V.default_vocabulary()
        self.root: dict = {}
        for seq in sequences:
            node = self.root
            for tid in self.vocab.encode(seq.tokens) + [self.vocab.truncate_id]:
                node.setdefault("next", tid)
                node = node.setdefault(tid, {})

    def next_logits(self, history: Sequence[int], mask: np.ndarray | None = None) -> np.ndarray:
        node = self.root
        for tid in history:
            node = node.get(int(tid))
            if node is None:
                return np.zeros(len(self.vocab))
        out = np.full(len(self.vocab), -np.inf)
        if "next" not in node:
            return np.zeros(len(self.vocab))
        out[node["next"]] = 0.0
        return out


class ExternalModelSession:
    """Out-of-process model speaking a line protocol over stdin/stdout.

    The peer must first print ``HELLO topobi-lm 1``. For every step the
    toolkit sends ``CTX <k> <tok_1> ... <tok_k>`` (token texts) and
    ``MASK <m> <id_1> ... <id_m>``; the peer answers with
    ``LOGITS <id>:<value> ...`` covering at least every masked-in id.
    """

    def __init__(self, command: str | Sequence[str], vocab: V.Vocabulary | None = None):
        self.vocab = vocab or V.default_vocabulary()
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.transcript: deque[str] = deque(maxlen=12)
        try:
            self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                         text=True, bufsize=1)
        except OSError as exc:
            raise SessionError(f"cannot start model process {argv!r}: {exc}") from exc
        hello = self._read()
        if hello != HANDSHAKE:
            self.close()
            raise SessionError(f"bad handshake {hello!r}; transcript tail:\n{self.tail()}")

    def tail(self) -> str:
        return "\n".join(self.transcript)

    def _send(self, line: str) -> None:
        self.transcript.append("> " + line)
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SessionError(f"model process closed its input: {exc}; transcript tail:\n{self.tail()}") from exc

    def _read(self) -> str:
        line = self.proc.stdout.readline()
        if not line:
            raise SessionError(f"model process ended the session; transcript tail:\n{self.tail()}")
        line = line.rstrip("\n")
        self.transcript.append("< " + line)
        return line

    def next_logits(self, history: Sequence[int], mask: np.ndarray) -> np.ndarray:
        ids = mask_to_ids(mask)
        self._send(f"CTX {len(history)} " + " ".join(self.vocab.text(int(t)) for t in history))
        self._send(f"MASK {len(ids)} " + " ".join(map(str, ids)))
        reply = self._read()
        head, _, body = reply.partition(" ")
        if head != "LOGITS":
            raise SessionError(f"expected LOGITS, got {reply!r}; transcript tail:\n{self.tail()}")
        out = np.full(len(self.vocab), -np.inf)
        seen = set()
        for item in body.split():
            key, sep, value = item.partition(":")
            try:
                tid, val = int(key), float(value)
            except ValueError:
                raise SessionError(f"malformed LOGITS entry {item!r}; transcript tail:\n{self.tail()}") from None
            if not sep or not 0 <= tid < len(self.vocab):
                raise SessionError(f"malformed LOGITS entry {item!r}; transcript tail:\n{self.tail()}")
            out[tid] = val
            seen.add(tid)
        missing = [i for i in ids if i not in seen]
        if missing:
            raise ProtocolError(f"peer omitted logits for admissible ids {missing[:10]}")
        return out

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()

    def __enter__(self) -> "ExternalModelSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_model_session(command: str | Sequence[str], vocab: V.Vocabulary | None = None) -> ExternalModelSession:
    return ExternalModelSession(command, vocab)


# sampling -----------------------------------------------------------------

class Outcome(enum.Enum):
    TERMINATED = "Terminated"
    DEAD_END = "DeadEnd"
    LENGTH_CAPPED = "LengthCapped"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 0.7
    max_length: int = MAX_LENGTH
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise ConfigurationError("temperature must be > 0")


@dataclass
class SampleResult:
    sequence: CircuitSequence
    outcome: Outcome
    circuit_type: str
    seed: int = 0


def masked_probs(logits: np.ndarray, mask: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature-scale, mask to -inf and renormalise."""
    scaled = np.where(mask, logits / temperature, -np.inf)
    top = scaled.max()
    if not np.isfinite(top):  # model gave no mass to any admissible token
        scaled = np.where(mask, 0.0, -np.inf)
        top = 0.0
    p = np.exp(scaled - top)
    return p / p.sum()


def _draw(logits: np.ndarray, ids: np.ndarray, temperature: float, u: float) -> int:
    """Inverse-CDF draw restricted to ``ids``; equivalent to sampling :func:`masked_probs`."""
    scaled = logits[ids] / temperature
    top = scaled.max()
    if not np.isfinite(top):
        scaled = np.zeros(len(ids))
        top = 0.0
    cdf = np.cumsum(np.exp(scaled - top))
    j = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return int(ids[min(j, len(ids) - 1)])


def sample_sequence(model: TokenModel, circuit_type: str, config: SamplerConfig = SamplerConfig(),
                    on_step: Callable[[np.ndarray, int], None] | None = None) -> SampleResult:
    """Grammar-constrained ancestral sampling of one circuit."""
    vocab = model.vocab
    dec = GrammarDecoder(circuit_type, vocab)
    rng = np.random.default_rng(config.seed)
    history = vocab.encode(dec.tokens)
    outcome = Outcome.LENGTH_CAPPED
    while len(history) < config.max_length:
        mask = dec.mask()
        ids = np.flatnonzero(mask)
        if not len(ids):
            outcome = Outcome.DEAD_END
            break
        tid = _draw(model.next_logits(history, mask), ids, config.temperature, rng.random())
        if on_step is not None:
            on_step(mask, tid)
        if tid == vocab.truncate_id:
            outcome = Outcome.TERMINATED
            break
        dec.apply(tid, check=False)
        history.append(tid)
    seq = CircuitSequence(vocab.decode(history), config.max_length)
    return SampleResult(seq, outcome, circuit_type, config.seed)


def sample_seed(base: int, circuit_type: str, index: int) -> int:
    """Per-sample seed independent of worker count and scheduling."""
    t = V.CIRCUIT_TYPES.index(circuit_type) if circuit_type in V.CIRCUIT_TYPES else 99
    return int(np.random.SeedSequence([base, t, index]).generate_state(1)[0])


_WORKER_MODEL: TokenModel | None = None


def _init_worker(factory: Callable[[], TokenModel]) -> None:
    global _WORKER_MODEL
    _WORKER_MODEL = factory()


def _run_task(task: tuple[str, int, float, int]) -> SampleResult:
    circuit_type, seed, temperature, max_length = task
    return sample_sequence(_WORKER_MODEL, circuit_type, SamplerConfig(temperature, max_length, seed))


def generate(model_factory: Callable[[], TokenModel], plan: Sequence[tuple[str, int]], base_seed: int = 0,
             temperature: float = 0.7, max_length: int = MAX_LENGTH, jobs: int = 1) -> list[SampleResult]:
    """Sample ``count`` circuits for each ``(circuit_type, count)`` in ``plan``.

    Output order is the plan order regardless of ``jobs``. ``model_factory``
    must be picklable when ``jobs > 1``; each worker builds its own model (and
    so its own external session).
    """
    tasks = [(t, sample_seed(base_seed, t, i), temperature, max_length)
             for t, count in plan for i in range(count)]
    if jobs <= 1:
        _init_worker(model_factory)
        try:
            return [_run_task(task) for task in tasks]
        finally:
            close = getattr(_WORKER_MODEL, "close", None)
            if close:
                close()
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(model_factory,)) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (jobs * 8))))


def equal_shares(total: int, types: Sequence[str] = V.CIRCUIT_TYPES) -> list[tuple[str, int]]:
    """Split ``total`` samples over types as evenly as possible (e.g. 66 or 67 each for 1,000)."""
    base, extra = divmod(total, len(types))
    return [(t, base + (1 if i < extra else 0)) for i, t in enumerate(types)]

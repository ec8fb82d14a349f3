"""Playing policies: random, scripted heuristic, value nets, and remotes.

Every agent sees only a View plus the legal action list and returns one of
the legal combos.  `explain` exposes candidate scores for case-study dumps.
"""

from __future__ import annotations

import json
import random
import socket

import numpy as np

from . import features
from .cards import Combo, ComboKind, combo_str, combo_str_full, single_order
from .dmc import q_values, select_action
from .engine import team_of
from .features import View
from .net import load_checkpoint
from .ppo import policy_forward, top_k_candidates


class Agent:
    name = "agent"

    def decide(self, view: View, legal: list[Combo]) -> Combo:
        raise NotImplementedError

    def explain(self, view: View, legal: list[Combo]) -> list[dict]:
        """Candidate list with scores, best first. Default: no preference."""
        return [{"move": combo_str(c), "score": 0.0} for c in legal]


class RandomAgent(Agent):
    name = "random"

    def __init__(self, seed: int | None = None):
        self.rng = random.Random(seed)

    def decide(self, view, legal):
        return legal[self.rng.randrange(len(legal))]


class GreedyAgent(Agent):
    """Scripted baseline.

    Leading: smallest non-bomb combo, fewest cards first then lowest rank.
    Following: smallest same-kind cover; a bomb only once some opponent is
    down to `bomb_threshold` cards; otherwise pass.
    """

    name = "greedy"

    def __init__(self, bomb_threshold: int = 2):
        self.bomb_threshold = bomb_threshold

    def _order(self, combo: Combo, level: int):
        if combo.kind in (ComboKind.STRAIGHT, ComboKind.TUBE, ComboKind.PLATE,
                          ComboKind.STRAIGHT_FLUSH):
            key = combo.key_rank
        else:
            key = single_order(combo.key_rank, level)
        return (combo.size, key, int(combo.kind))

    def decide(self, view, legal):
        level = view.current_level
        if view.to_beat is None:
            plain = [c for c in legal if not c.is_bomb_class()]
            pool = plain if plain else legal
            return min(pool, key=lambda c: self._order(c, level))
        same = [
            c for c in legal
            if not c.is_pass() and not c.is_bomb_class()
            and c.kind == view.to_beat.kind
        ]
        if same:
            return min(same, key=lambda c: self._order(c, level))
        opponents = [s for s in range(4) if team_of(s) != team_of(view.seat)]
        shortest = min(view.hand_sizes[s] for s in opponents
                       if view.hand_sizes[s] > 0)
        bombs = [c for c in legal if c.is_bomb_class()]
        if bombs and shortest <= self.bomb_threshold:
            return min(bombs, key=lambda c: self._order(c, level))
        passes = [c for c in legal if c.is_pass()]
        return passes[0] if passes else min(
            legal, key=lambda c: self._order(c, level))


class DmcAgent(Agent):
    """Greedy (or ε-greedy) over the Q network's action values."""

    name = "dmc"

    def __init__(self, net, epsilon: float = 0.0, seed: int | None = None):
        self.net = net
        self.epsilon = epsilon
        self.rng = random.Random(seed)

    @classmethod
    def from_checkpoint(cls, path, epsilon: float = 0.0, seed=None):
        net, _, _ = load_checkpoint(path, expect_kind="q")
        return cls(net, epsilon=epsilon, seed=seed)

    def decide(self, view, legal):
        svec = features.encode_state(view)
        q = q_values(self.net, svec, legal)
        return legal[select_action(q, self.epsilon, self.rng)]

    def explain(self, view, legal):
        svec = features.encode_state(view)
        q = q_values(self.net, svec, legal)
        order = np.argsort(-q, kind="stable")
        return [{"move": combo_str(legal[i]), "cards": combo_str_full(legal[i]),
                 "score": float(q[i])} for i in order]


class UniformTopKAgent(Agent):
    """Uniform choice among the DMC net's top-k candidates."""

    name = "uniform-top-k"

    def __init__(self, dmc_net, k: int, seed: int | None = None):
        self.dmc_net = dmc_net
        self.k = k
        self.rng = random.Random(seed)

    def decide(self, view, legal):
        svec = features.encode_state(view)
        q = q_values(self.dmc_net, svec, legal)
        top = top_k_candidates(q, self.k)
        return legal[top[self.rng.randrange(len(top))]]


class PpoAgent(Agent):
    """Samples among DMC top-k candidates with the trained policy head."""

    name = "ppo"

    def __init__(self, ppo_net, dmc_net, k: int, seed: int | None = None,
                 deterministic: bool = False):
        self.ppo_net = ppo_net
        self.dmc_net = dmc_net
        self.k = k
        self.rng = random.Random(seed)
        self.deterministic = deterministic

    @classmethod
    def from_checkpoints(cls, ppo_path, dmc_path, k: int, seed=None,
                         deterministic: bool = False):
        ppo_net, _, meta = load_checkpoint(ppo_path, expect_kind="ppo")
        dmc_net, _, _ = load_checkpoint(dmc_path, expect_kind="q")
        k_saved = meta.get("extra", {}).get("k")
        if k_saved is not None and int(k_saved) != k:
            raise ValueError(f"checkpoint was trained with k={k_saved}, got k={k}")
        return cls(ppo_net, dmc_net, k, seed=seed, deterministic=deterministic)

    def _candidates(self, view, legal):
        svec = features.encode_state(view)
        q = q_values(self.dmc_net, svec, legal)
        top = top_k_candidates(q, self.k)
        cands = [legal[i] for i in top]
        x, mask = features.ppo_input(svec, cands, self.k)
        probs, v = policy_forward(self.ppo_net, x, mask)
        return cands, probs, v, q[top]

    def decide(self, view, legal):
        cands, probs, _, _ = self._candidates(view, legal)
        if len(cands) == 1:
            return cands[0]
        if self.deterministic:
            return cands[int(np.argmax(probs))]
        u = self.rng.random()
        acc = 0.0
        for i in range(len(cands)):
            acc += float(probs[i])
            if u < acc:
                return cands[i]
        return cands[len(cands) - 1]

    def explain(self, view, legal):
        cands, probs, v, qs = self._candidates(view, legal)
        rows = [{"move": combo_str(c), "cards": combo_str_full(c),
                 "score": float(probs[i]), "q": float(qs[i])}
                for i, c in enumerate(cands)]
        rows.sort(key=lambda r: -r["score"])
        return rows


class RemoteAgent(Agent):
    """Adapter for an external policy over newline-delimited JSON.

    Per decision we send one request line
        {"type": "act_request", "view": {...}, "legal": ["Pass", "Pair:KK", ...]}
    and expect {"index": i} selecting into the legal list.
    """

    name = "remote"

    def __init__(self, address: str, timeout: float = 30.0):
        host, _, port = address.rpartition(":")
        self.sock = socket.create_connection((host or "127.0.0.1", int(port)),
                                             timeout=timeout)
        self.file = self.sock.makefile("rw", encoding="utf-8")

    def decide(self, view, legal):
        request = {
            "type": "act_request",
            "view": view.to_json(),
            "legal": [combo_str_full(c) for c in legal],
        }
        self.file.write(json.dumps(request) + "\n")
        self.file.flush()
        line = self.file.readline()
        if not line:
            raise ConnectionError("remote agent closed the connection")
        index = int(json.loads(line)["index"])
        if not 0 <= index < len(legal):
            raise ValueError(f"remote agent chose index {index} of {len(legal)}")
        return legal[index]

    def close(self):
        try:
            self.file.close()
            self.sock.close()
        except OSError:
            pass


def parse_agent_spec(spec: str, seed: int | None = None) -> Agent:
    """Build an agent from a spec string.

    Grammar: `random | greedy | dmc:<ckpt> | ppo:<ckpt>,dmc:<ckpt>,k=<n>
    | topk:<dmc-ckpt>,k=<n> | remote:<host:port>`.
    """
    spec = spec.strip()
    if spec == "random":
        return RandomAgent(seed=seed)
    if spec == "greedy":
        return GreedyAgent()
    if spec.startswith("dmc:"):
        return DmcAgent.from_checkpoint(spec[4:], seed=seed)
    if spec.startswith("ppo:"):
        parts = spec[4:].split(",")
        ppo_path = parts[0]
        dmc_path = None
        k = None
        for part in parts[1:]:
            if part.startswith("dmc:"):
                dmc_path = part[4:]
            elif part.startswith("k="):
                k = int(part[2:])
        if dmc_path is None or k is None:
            raise ValueError(
                "ppo spec needs `ppo:<ckpt>,dmc:<ckpt>,k=<n>`: " + spec)
        return PpoAgent.from_checkpoints(ppo_path, dmc_path, k, seed=seed)
    if spec.startswith("topk:"):
        parts = spec[5:].split(",")
        if len(parts) != 2 or not parts[1].startswith("k="):
            raise ValueError("topk spec needs `topk:<dmc-ckpt>,k=<n>`: " + spec)
        net, _, _ = load_checkpoint(parts[0], expect_kind="q")
        return UniformTopKAgent(net, int(parts[1][2:]), seed=seed)
    if spec.startswith("remote:"):
        return RemoteAgent(spec[7:])
    raise ValueError(f"unknown agent spec: {spec!r}")

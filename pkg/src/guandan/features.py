"""State/action encoders feeding the value and policy networks.

The state vector is 513 wide: own hand, unseen cards, trick context,
partner's last move, opponent card counts, per-opponent played cards,
level one-hots and wild-capability flags.  Actions are 54-wide card count
vectors (all zeros = Pass).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cards import (
    NUM_CARDS,
    PASS,
    CardSet,
    Combo,
    ComboKind,
    card_index,
    card_str,
    parse_card,
    seq_rank,
    seq_windows,
    wild_index,
    KIND_NAMES,
    KIND_BY_NAME,
)
from .engine import NUM_SEATS, HAND_SIZE, RoundState, EpisodeState, partner_of, team_of

STATE_DIM = 513
ACTION_DIM = 54
Q_INPUT_DIM = STATE_DIM + ACTION_DIM

HAND_SLICE = slice(0, 54)
UNSEEN_SLICE = slice(54, 108)
TO_BEAT_SLICE = slice(108, 162)
PARTNER_SLICE = slice(162, 216)
COUNTS_SLICE = slice(216, 300)
PLAYED_SLICE = slice(300, 462)
LEVELS_SLICE = slice(462, 501)
WILD_SLICE = slice(501, 513)

# Kinds a wild can help complete, in flag order; Singles and Joker Bombs
# are excluded (a lone wild is just the level card; jokers cannot be faked).
WILD_FLAG_KINDS = (
    ComboKind.PAIR,
    ComboKind.TRIPLE,
    ComboKind.TUBE,
    ComboKind.PLATE,
    ComboKind.FULL_HOUSE,
    ComboKind.STRAIGHT,
    ComboKind.BOMB,
    ComboKind.STRAIGHT_FLUSH,
)


@dataclass
class View:
    """Everything one seat may legally know mid-round."""

    seat: int
    hand: CardSet
    to_beat: Combo | None
    last_moves: tuple  # per seat: None, or the last Combo (possibly Pass)
    hand_sizes: tuple[int, int, int, int]
    played: tuple[CardSet, CardSet, CardSet, CardSet]
    my_level: int
    opp_level: int
    current_level: int
    turn: int
    trick_leader: int
    finish_order: tuple[int, ...]
    round_index: int

    def to_json(self) -> dict:
        return {
            "seat": self.seat,
            "hand": [card_str(i) for i in self.hand.indices()],
            "to_beat": _combo_json(self.to_beat),
            "last_moves": [_combo_json(m) for m in self.last_moves],
            "hand_sizes": list(self.hand_sizes),
            "played": [[card_str(i) for i in p.indices()] for p in self.played],
            "my_level": self.my_level,
            "opp_level": self.opp_level,
            "current_level": self.current_level,
            "turn": self.turn,
            "trick_leader": self.trick_leader,
            "finish_order": list(self.finish_order),
            "round_index": self.round_index,
        }

    @classmethod
    def from_json(cls, d: dict) -> "View":
        return cls(
            seat=d["seat"],
            hand=CardSet.from_indices(parse_card(t) for t in d["hand"]),
            to_beat=_combo_from_json(d["to_beat"]),
            last_moves=tuple(_combo_from_json(m) for m in d["last_moves"]),
            hand_sizes=tuple(d["hand_sizes"]),
            played=tuple(
                CardSet.from_indices(parse_card(t) for t in p) for p in d["played"]
            ),
            my_level=d["my_level"],
            opp_level=d["opp_level"],
            current_level=d["current_level"],
            turn=d["turn"],
            trick_leader=d["trick_leader"],
            finish_order=tuple(d["finish_order"]),
            round_index=d["round_index"],
        )


def _combo_json(combo) -> dict | None:
    if combo is None:
        return None
    return {
        "kind": KIND_NAMES[combo.kind],
        "cards": [card_str(i) for i in combo.cards.indices()],
        "key": combo.key_rank,
    }


def _combo_from_json(d) -> Combo | None:
    if d is None:
        return None
    kind = KIND_BY_NAME[d["kind"]]
    if kind == ComboKind.PASS:
        return PASS
    return Combo(kind, CardSet.from_indices(parse_card(t) for t in d["cards"]), d["key"])


def view_for(seat: int, state: RoundState, episode: EpisodeState) -> View:
    team = team_of(seat)
    return View(
        seat=seat,
        hand=state.hands[seat],
        to_beat=state.to_beat(),
        last_moves=state.last_moves,
        hand_sizes=tuple(h.size() for h in state.hands),
        played=state.played,
        my_level=episode.team_levels[team],
        opp_level=episode.team_levels[1 - team],
        current_level=state.level,
        turn=state.turn,
        trick_leader=state.trick_leader,
        finish_order=state.finish_order,
        round_index=episode.round_index,
    )


def encode_action(combo: Combo | None) -> np.ndarray:
    vec = np.zeros(ACTION_DIM, dtype=np.float32)
    if combo is not None and not combo.is_pass():
        vec[:] = np.frombuffer(combo.cards.counts, dtype=np.uint8)
    return vec


def encode_state(view: View) -> np.ndarray:
    vec = np.zeros(STATE_DIM, dtype=np.float32)
    counts = np.frombuffer(view.hand.counts, dtype=np.uint8)
    vec[HAND_SLICE] = counts

    unseen = np.full(NUM_CARDS, 2.0, dtype=np.float32)
    unseen -= counts
    for p in view.played:
        unseen -= np.frombuffer(p.counts, dtype=np.uint8)
    vec[UNSEEN_SLICE] = unseen

    if view.to_beat is not None and not view.to_beat.is_pass():
        vec[TO_BEAT_SLICE] = encode_action(view.to_beat)

    partner = partner_of(view.seat)
    if view.hand_sizes[partner] == 0:
        vec[PARTNER_SLICE] = -1.0
    else:
        move = view.last_moves[partner]
        if move is not None and not move.is_pass():
            vec[PARTNER_SLICE] = encode_action(move)

    others = [(view.seat + i) % NUM_SEATS for i in (1, 2, 3)]
    base = COUNTS_SLICE.start
    for j, s in enumerate(others):
        vec[base + j * 28 + view.hand_sizes[s]] = 1.0
    base = PLAYED_SLICE.start
    for j, s in enumerate(others):
        vec[base + j * 54 : base + (j + 1) * 54] = np.frombuffer(
            view.played[s].counts, dtype=np.uint8
        )

    base = LEVELS_SLICE.start
    vec[base + view.my_level] = 1.0
    vec[base + 13 + view.opp_level] = 1.0
    vec[base + 26 + view.current_level] = 1.0

    vec[WILD_SLICE] = _wild_flags(view.hand, view.current_level)
    return vec


def _wild_flags(hand: CardSet, level: int) -> np.ndarray:
    """[has wild, has both wilds, 8 kind-completion flags, 2 zeros]."""
    flags = np.zeros(12, dtype=np.float32)
    widx = wild_index(level)
    w = hand.counts[widx]
    flags[0] = 1.0 if w >= 1 else 0.0
    flags[1] = 1.0 if w == 2 else 0.0
    if w == 0:
        return flags
    nat = list(hand.rank_counts())
    nat[level] -= w
    for i, kind in enumerate(WILD_FLAG_KINDS):
        flags[2 + i] = 1.0 if _wild_completes(kind, nat, w, hand, widx) else 0.0
    return flags


def _wild_completes(kind: ComboKind, nat: list[int], w: int, hand: CardSet, widx: int) -> bool:
    """Whether a combo of this kind exists in hand using at least one wild.

    With w >= 1, a kind is formable-with-wild exactly when the natural
    deficit of some target profile is <= w: a wild fills missing slots,
    and can displace a natural when nothing is missing.
    """
    if kind == ComboKind.PAIR:
        return any(nat[r] >= 2 - w for r in range(13))
    if kind == ComboKind.TRIPLE:
        return any(nat[r] >= 3 - w for r in range(13))
    if kind == ComboKind.BOMB:
        return any(nat[r] >= 4 - w for r in range(13))
    if kind == ComboKind.FULL_HOUSE:
        for r3 in range(13):
            for r2 in range(13):
                if r2 == r3:
                    continue
                deficit = max(0, 3 - nat[r3]) + max(0, 2 - nat[r2])
                if deficit <= w:
                    return True
        return False
    if kind in (ComboKind.STRAIGHT, ComboKind.TUBE, ComboKind.PLATE):
        mult = {ComboKind.STRAIGHT: 1, ComboKind.TUBE: 2, ComboKind.PLATE: 3}[kind]
        length = {ComboKind.STRAIGHT: 5, ComboKind.TUBE: 3, ComboKind.PLATE: 2}[kind]
        for start in seq_windows(kind):
            deficit = sum(
                max(0, mult - min(nat[seq_rank(start + i)], mult))
                for i in range(length)
            )
            if deficit <= w:
                return True
        return False
    if kind == ComboKind.STRAIGHT_FLUSH:
        for start in seq_windows(ComboKind.STRAIGHT_FLUSH):
            ranks = [seq_rank(start + i) for i in range(5)]
            for s in range(4):
                missing = sum(
                    1
                    for r in ranks
                    if (idx := card_index(r, s)) == widx or hand.counts[idx] == 0
                )
                if missing <= w:
                    return True
        return False
    raise ValueError(kind)


def q_input(state_vec: np.ndarray, action_vec: np.ndarray) -> np.ndarray:
    return np.concatenate([state_vec, action_vec])


def q_inputs(state_vec: np.ndarray, combos: list[Combo]) -> np.ndarray:
    """Batch of q-net inputs, one row per candidate action."""
    n = len(combos)
    out = np.empty((n, Q_INPUT_DIM), dtype=np.float32)
    out[:, :STATE_DIM] = state_vec
    for i, c in enumerate(combos):
        out[i, STATE_DIM:] = encode_action(c)
    return out


def ppo_input_dim(k: int) -> int:
    return STATE_DIM + ACTION_DIM * k + k


def ppo_input(state_vec: np.ndarray, candidates: list[Combo], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat policy-net input plus the legality mask.

    Real candidates fill the first slots; pad slots are -1 throughout and
    flagged illegal.
    """
    m = len(candidates)
    if m == 0:
        raise ValueError("need at least one candidate")
    if m > k:
        raise ValueError(f"{m} candidates exceed k={k}")
    vec = np.empty(ppo_input_dim(k), dtype=np.float32)
    vec[:STATE_DIM] = state_vec
    legal = np.zeros(k, dtype=np.float32)
    for slot in range(k):
        base = STATE_DIM + slot * ACTION_DIM
        if slot < m:
            vec[base : base + ACTION_DIM] = encode_action(candidates[slot])
            legal[slot] = 1.0
        else:
            vec[base : base + ACTION_DIM] = -1.0
    vec[STATE_DIM + k * ACTION_DIM :] = legal
    return vec, legal

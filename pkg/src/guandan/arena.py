"""Team-vs-team evaluation: seeded matches, win statistics, case studies."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

from . import features
from .agents import Agent
from .cards import combo_str, combo_str_full
from .engine import (NUM_SEATS, Episode, EpisodeState, RoundState, replay,
                     team_of)

ROLE_NAMES = ("Banker", "Follower", "Third", "Dweller", "DoubleDweller")


def wilson_interval(wins: int, n: int, z: float = 1.96):
    """95% score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = wins / n
    denom = 1 + z * z / n
    centre = p + z * z / (2 * n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return ((centre - half) / denom, (centre + half) / denom)


@dataclass
class MatchReport:
    n_games: int
    wins_a: int
    wins_b: int
    forfeits_a: int = 0
    forfeits_b: int = 0
    rounds_total: int = 0
    role_tally_a: dict = field(default_factory=dict)
    role_tally_b: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def winrate_a(self) -> float:
        return self.wins_a / self.n_games if self.n_games else 0.0

    @property
    def mean_rounds(self) -> float:
        return self.rounds_total / self.n_games if self.n_games else 0.0

    @property
    def ci95(self):
        return wilson_interval(self.wins_a, self.n_games)

    def to_json(self) -> dict:
        lo, hi = self.ci95
        return {
            "n_games": self.n_games,
            "wins_a": self.wins_a,
            "wins_b": self.wins_b,
            "winrate_a": self.winrate_a,
            "ci95_a": [lo, hi],
            "forfeits_a": self.forfeits_a,
            "forfeits_b": self.forfeits_b,
            "mean_rounds": self.mean_rounds,
            "rounds_total": self.rounds_total,
            "role_tally_a": self.role_tally_a,
            "role_tally_b": self.role_tally_b,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "MatchReport":
        return cls(
            n_games=d["n_games"], wins_a=d["wins_a"], wins_b=d["wins_b"],
            forfeits_a=d["forfeits_a"], forfeits_b=d["forfeits_b"],
            rounds_total=d["rounds_total"],
            role_tally_a=dict(d["role_tally_a"]),
            role_tally_b=dict(d["role_tally_b"]),
            seed=d["seed"],
        )


class Forfeit(Exception):
    def __init__(self, seat: int):
        self.seat = seat


def play_game(agents_by_seat, rng: random.Random, max_rounds: int = 50,
              record_log: bool = False):
    """One full episode; returns (winner_team, rounds, role_counts, log).

    role_counts maps seat -> {role: n}.  An illegal move raises Forfeit.
    """
    ep = Episode(rng=rng, max_rounds=max_rounds, record_log=record_log)
    while not ep.over:
        seat = ep.seat_to_act
        legal = ep.legal_actions()
        view = features.view_for(seat, ep.round, ep.episode)
        move = agents_by_seat[seat].decide(view, legal)
        identities = {c.identity() for c in legal}
        if move is None or move.identity() not in identities:
            raise Forfeit(seat)
        ep.play(move)
    counts = [{} for _ in range(NUM_SEATS)]
    for rec in ep.round_records:
        for seat in range(NUM_SEATS):
            role = rec.result.roles[seat]
            counts[seat][role] = counts[seat].get(role, 0) + 1
    log = ep.dump_log() if record_log else None
    return ep.episode_winner, len(ep.round_records), counts, log


def play_match(team_a, team_b, n_games: int, seed: int = 0,
               max_rounds: int = 50, progress=None) -> MatchReport:
    """2v2 match with seat alternation: even games put team A on seats 0/2."""
    if len(team_a) != 2 or len(team_b) != 2:
        raise ValueError("each team supplies exactly two agents")
    report = MatchReport(n_games=n_games, wins_a=0, wins_b=0, seed=seed)
    for g in range(n_games):
        if g % 2 == 0:
            seats = [team_a[0], team_b[0], team_a[1], team_b[1]]
            a_team = 0
        else:
            seats = [team_b[0], team_a[0], team_b[1], team_a[1]]
            a_team = 1
        rng = random.Random(seed * 1_000_003 + g)
        try:
            winner, rounds, counts, _ = play_game(seats, rng, max_rounds)
        except Forfeit as f:
            if team_of(f.seat) == a_team:
                report.forfeits_a += 1
                report.wins_b += 1
            else:
                report.forfeits_b += 1
                report.wins_a += 1
            continue
        report.rounds_total += rounds
        if winner == a_team:
            report.wins_a += 1
        else:
            report.wins_b += 1
        for seat in range(NUM_SEATS):
            tally = (report.role_tally_a if team_of(seat) == a_team
                     else report.role_tally_b)
            for role, n in counts[seat].items():
                tally[role] = tally.get(role, 0) + n
        if progress is not None:
            progress(g + 1, report)
    return report


def dump_case_study(log_text: str, agent: Agent, decision_index: int) -> dict:
    """Panel for one decision of a recorded episode.

    Fields: rank in play, seat, recent action history, remaining hand
    counts, own hand, legal set, agent candidates with scores, and the
    move actually taken in the record.
    """
    plays_seen = 0
    history: list[dict] = []
    episode = EpisodeState()
    pre_state: RoundState | None = None
    chosen_event = None
    for event, state in replay(log_text):
        if event["event"] == "round_start":
            episode.current_level = event["level"]
            episode.team_levels = list(event["team_levels"])
            episode.round_index = event["round"]
            history = []
        if event["event"] != "play":
            pre_state = state
            continue
        if plays_seen == decision_index:
            chosen_event = event
            break
        history.append({"seat": event["seat"], "move": event["combo"]})
        plays_seen += 1
        pre_state = state
    if chosen_event is None:
        raise IndexError(f"decision {decision_index} not in log "
                         f"({plays_seen} plays)")

    seat = chosen_event["seat"]
    view = features.view_for(seat, pre_state, episode)
    legal = _legal_for(pre_state)
    candidates = agent.explain(view, legal)
    return {
        "decision_index": decision_index,
        "round": episode.round_index,
        "level": episode.current_level,
        "seat": seat,
        "history": history[-12:],
        "hand": [t for t in _tokens(view.hand)],
        "remaining_hand_counts": list(view.hand_sizes),
        "to_beat": combo_str(view.to_beat) if view.to_beat else None,
        "legal": [combo_str_full(c) for c in legal],
        "candidates": candidates,
        "chosen": chosen_event["combo"],
    }


def _legal_for(state: RoundState):
    from .movegen import legal_actions
    return legal_actions(state.hands[state.turn], state.to_beat(), state.level)


def _tokens(cards):
    from .cards import card_str
    return [card_str(i) for i in cards.indices()]

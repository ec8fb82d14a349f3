"""Round and episode state machine.

Seats 0..3 play counterclockwise; 0&2 and 1&3 are partners.  A round runs
tricks until one team has emptied both hands, produces finish-order roles
and a promotion of 3/2/1 levels, and the next round opens with the
tribute phase.  An episode ends when a team wins a round at level A with
its partner finishing second or third.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace

from .cards import (
    PASS,
    RANK_A,
    RANK_POINT,
    RANK_RJ,
    RJ_INDEX,
    CardSet,
    Combo,
    card_index,
    card_rank,
    card_str,
    classify,
    combo_str_full,
    covers,
    parse_card,
    seq_rank,
    seq_windows,
    single_order,
    wild_index,
    ComboKind,
)
from . import movegen

NUM_SEATS = 4
HAND_SIZE = 27

BANKER = "Banker"
FOLLOWER = "Follower"
THIRD = "Third"
DWELLER = "Dweller"
DOUBLE_DWELLER = "DoubleDweller"

PROMOTION_BY_PARTNER_ROLE = {FOLLOWER: 3, THIRD: 2, DWELLER: 1}


def team_of(seat: int) -> int:
    return seat % 2


def partner_of(seat: int) -> int:
    return (seat + 2) % NUM_SEATS


@dataclass(frozen=True)
class RoundState:
    hands: tuple[CardSet, CardSet, CardSet, CardSet]
    turn: int
    trick_leader: int
    last_play: tuple[int, Combo] | None
    consecutive_passes: int
    finish_order: tuple[int, ...]
    played: tuple[CardSet, CardSet, CardSet, CardSet]
    last_moves: tuple[Combo | None, Combo | None, Combo | None, Combo | None]
    level: int

    def to_beat(self) -> Combo | None:
        return self.last_play[1] if self.last_play else None

    def finished(self, seat: int) -> bool:
        return self.hands[seat].size() == 0

    def active_seats(self) -> list[int]:
        return [s for s in range(NUM_SEATS) if not self.finished(s)]


@dataclass(frozen=True)
class RoundResult:
    roles: tuple[str, str, str, str]
    winning_team: int
    promotion: int
    finish_order: tuple[int, ...]

    @property
    def banker(self) -> int:
        return self.roles.index(BANKER)


@dataclass
class EpisodeState:
    team_levels: list[int] = field(default_factory=lambda: [0, 0])
    current_level: int = 0
    round_index: int = 1
    episode_winner: int | None = None


class IllegalMove(ValueError):
    pass


def deal(rng, level: int, leader: int = 0) -> RoundState:
    """Shuffle the double deck into four 27-card hands."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    deck = CardSet.full_deck().indices()
    rng.shuffle(deck)
    hands = tuple(
        CardSet.from_indices(deck[s * HAND_SIZE : (s + 1) * HAND_SIZE])
        for s in range(NUM_SEATS)
    )
    return RoundState(
        hands=hands,
        turn=leader,
        trick_leader=leader,
        last_play=None,
        consecutive_passes=0,
        finish_order=(),
        played=tuple(CardSet.empty() for _ in range(NUM_SEATS)),
        last_moves=(None, None, None, None),
        level=level,
    )


def check_legal(state: RoundState, combo: Combo) -> None:
    """Raise IllegalMove unless combo is playable by state.turn right now."""
    seat = state.turn
    hand = state.hands[seat]
    to_beat = state.to_beat()
    if combo.is_pass():
        if to_beat is None:
            raise IllegalMove("the trick leader must play")
        return
    if not hand.contains(combo.cards):
        raise IllegalMove("cards not in hand")
    interpretations = classify(combo.cards, state.level)
    if not any(
        c.kind == combo.kind and c.key_rank == combo.key_rank for c in interpretations
    ):
        raise IllegalMove(f"cards do not form {combo}")
    if to_beat is not None and not covers(combo, to_beat, state.level):
        raise IllegalMove(f"{combo} does not cover {combo_str_full(to_beat)}")


def _advance(state: RoundState) -> RoundState:
    """Move the turn to the next seat, closing the trick if play comes back
    around to the last player (or their empty seat)."""
    last_seat = state.last_play[0] if state.last_play else None
    s = state.turn
    for _ in range(1, NUM_SEATS + 1):
        s = (s + 1) % NUM_SEATS
        if s == last_seat:
            # Trick closes; winner leads, or their partner if they finished.
            leader = s if not state.finished(s) else partner_of(s)
            return replace(
                state,
                turn=leader,
                trick_leader=leader,
                last_play=None,
                consecutive_passes=0,
            )
        if not state.finished(s):
            return replace(state, turn=s)
    raise AssertionError("no active seat to advance to")


def step(state: RoundState, combo: Combo) -> RoundState:
    """Apply one action for state.turn and advance the turn."""
    check_legal(state, combo)
    seat = state.turn
    if combo.is_pass():
        last_moves = list(state.last_moves)
        last_moves[seat] = PASS
        state = replace(
            state,
            consecutive_passes=state.consecutive_passes + 1,
            last_moves=tuple(last_moves),
        )
        return _advance(state)

    hands = list(state.hands)
    played = list(state.played)
    last_moves = list(state.last_moves)
    hands[seat] = hands[seat].difference(combo.cards)
    played[seat] = played[seat].union(combo.cards)
    last_moves[seat] = combo
    finish = state.finish_order
    if hands[seat].size() == 0:
        finish = finish + (seat,)
    state = replace(
        state,
        hands=tuple(hands),
        played=tuple(played),
        last_moves=tuple(last_moves),
        last_play=(seat, combo),
        consecutive_passes=0,
        finish_order=finish,
    )
    if round_over(state):
        return state
    return _advance(state)


def round_over(state: RoundState) -> RoundResult | None:
    """Result once both members of some team have emptied their hands."""
    done = state.finish_order
    complete = None
    for team in (0, 1):
        members = [s for s in done if team_of(s) == team]
        if len(members) == 2:
            complete = team
            break
    if complete is None:
        return None

    roles = [""] * NUM_SEATS
    roles[done[0]] = BANKER
    roles[done[1]] = FOLLOWER
    rest = [s for s in range(NUM_SEATS) if s not in done]
    if len(done) == 2:
        for s in rest:
            roles[s] = DOUBLE_DWELLER
    else:
        roles[done[2]] = THIRD
        roles[rest[0]] = DWELLER
    winning_team = team_of(done[0])
    partner_role = roles[partner_of(done[0])]
    promotion = PROMOTION_BY_PARTNER_ROLE[partner_role]
    return RoundResult(
        roles=tuple(roles),
        winning_team=winning_team,
        promotion=promotion,
        finish_order=done,
    )


def apply_promotion(episode: EpisodeState, result: RoundResult) -> EpisodeState:
    """Advance the winning team's level; Q/K never skip A; the episode is
    won at level A only when the Banker's partner finished second or third."""
    levels = list(episode.team_levels)
    team = result.winning_team
    winner = None
    if levels[team] == RANK_A:
        if result.promotion >= 2:
            winner = team
    else:
        levels[team] = min(levels[team] + result.promotion, RANK_A)
    return EpisodeState(
        team_levels=levels,
        current_level=levels[team],
        round_index=episode.round_index + 1,
        episode_winner=winner,
    )


# ---------------------------------------------------------------------------
# Tribute phase
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TributePlan:
    payments: tuple[tuple[int, int, int], ...]  # (payer, receiver, card index)
    annulled: bool
    leader: int


def _biggest_single(hand: CardSet, level: int) -> int:
    """Highest card by single order, the wild excluded; ties by index."""
    widx = wild_index(level)
    best = None
    best_order = -1
    for idx in range(len(hand.counts)):
        if not hand.counts[idx] or idx == widx:
            continue
        o = single_order(card_rank(idx), level)
        if o > best_order:
            best, best_order = idx, o
    if best is None:
        # Hand is nothing but wild cards; rules give no payable card, pay one.
        best = widx
    return best


def _next_ccw(banker: int, seats: list[int]) -> int:
    """First of ``seats`` encountered counterclockwise after the banker."""
    s = banker
    for _ in range(NUM_SEATS):
        s = (s + 1) % NUM_SEATS
        if s in seats:
            return s
    raise AssertionError("no seat found")


def tribute_plan(
    prev: RoundResult, hands: tuple[CardSet, ...], new_level: int
) -> TributePlan:
    """Who pays what to whom, and who leads the first trick.

    Losers pay their biggest non-wild single; holding both Red Jokers on
    the losing side annuls the phase and the Banker leads.
    """
    banker = prev.banker
    payers = [s for s in range(NUM_SEATS) if prev.roles[s] in (DWELLER, DOUBLE_DWELLER)]
    rj_held = sum(hands[s].counts[RJ_INDEX] for s in payers)
    if rj_held == 2:
        return TributePlan(payments=(), annulled=True, leader=banker)

    if len(payers) == 1:
        payer = payers[0]
        card = _biggest_single(hands[payer], new_level)
        return TributePlan(
            payments=((payer, banker, card),), annulled=False, leader=payer
        )

    cards = {s: _biggest_single(hands[s], new_level) for s in payers}
    orders = {s: single_order(card_rank(cards[s]), new_level) for s in payers}
    if orders[payers[0]] != orders[payers[1]]:
        big = max(payers, key=lambda s: orders[s])
    else:
        big = _next_ccw(banker, payers)
    small = next(s for s in payers if s != big)
    payments = (
        (big, banker, cards[big]),
        (small, partner_of(banker), cards[small]),
    )
    return TributePlan(payments=payments, annulled=False, leader=big)


def tribute_return(hand: CardSet, level: int) -> int:
    """Card to hand back to the tribute payer, point 10 or less.

    Cascade: spare a card whose rank appears once and sits outside any
    natural bomb or straight flush; then break a pair or triple under 10;
    then chip a bomb at 10 or less.  Wilds and level-rank cards are kept
    until nothing else qualifies.
    """
    widx = wild_index(level)
    ranks = hand.rank_counts()
    protected = _straight_flush_cards(hand)

    def candidates(pred, allow_protected=False):
        out = []
        for idx in range(52):
            if not hand.counts[idx] or idx == widx:
                continue
            r = idx // 4
            if not allow_protected and (idx in protected or r == level):
                continue
            if pred(r):
                out.append(idx)
        out.sort(key=lambda i: (single_order(i // 4, level), i))
        return out

    loose = candidates(lambda r: ranks[r] == 1 and RANK_POINT[r] < 10)
    if loose:
        return loose[0]
    broken = candidates(lambda r: ranks[r] in (2, 3) and RANK_POINT[r] < 10)
    if broken:
        return broken[0]
    bombed = candidates(lambda r: ranks[r] >= 4 and RANK_POINT[r] <= 10)
    if bombed:
        return bombed[0]
    any_small = candidates(lambda r: RANK_POINT[r] <= 10, allow_protected=True)
    if any_small:
        return any_small[0]
    # No card at 10 or under (requires a hand of nothing but J+ and jokers);
    # give up the lowest-impact card instead.
    low = min(
        (i for i in range(len(hand.counts)) if hand.counts[i]),
        key=lambda i: (single_order(card_rank(i), level), i),
    )
    return low


def _straight_flush_cards(hand: CardSet) -> set[int]:
    """Indices locked inside a fully natural straight flush."""
    out: set[int] = set()
    for start in seq_windows(ComboKind.STRAIGHT_FLUSH):
        ranks = [seq_rank(start + i) for i in range(5)]
        for s in range(4):
            need = [card_index(r, s) for r in ranks]
            if all(hand.counts[i] for i in need):
                out.update(need)
    return out


def round_values(promotion: int, winning_team: int, episode_done: bool) -> list[float]:
    """Per-seat sample value for a finished round: +-promotion, with an
    extra +-1 on the final round of the episode."""
    vals = []
    for seat in range(NUM_SEATS):
        v = float(promotion) if team_of(seat) == winning_team else -float(promotion)
        if episode_done:
            v += 1.0 if team_of(seat) == winning_team else -1.0
        vals.append(v)
    return vals


# ---------------------------------------------------------------------------
# Episode runner
# ---------------------------------------------------------------------------

@dataclass
class RoundRecord:
    result: RoundResult
    values: list[float]
    episode_done: bool


class Episode:
    """Drives rounds, tribute phases and promotions for one full game.

    ``return_chooser(seat, hand, level, payer) -> card index`` lets a
    caller override the heuristic tribute return (table service uses it
    for human players); plays are validated against the rules either way.
    """

    def __init__(
        self,
        seed=None,
        rng: random.Random | None = None,
        return_chooser=None,
        max_rounds: int = 50,
        record_log: bool = False,
    ):
        self.rng = rng if rng is not None else random.Random(seed)
        self.return_chooser = return_chooser
        self.max_rounds = max_rounds
        self.episode = EpisodeState()
        self.round_records: list[RoundRecord] = []
        self.prev_result: RoundResult | None = None
        self.log: list[dict] = [] if record_log else None
        self.last_tribute: TributePlan | None = None
        self.round: RoundState = None
        self._start_round()

    # -- round lifecycle ---------------------------------------------------

    def _start_round(self):
        level = self.episode.current_level
        state = deal(self.rng, level, leader=0)
        if self.prev_result is None:
            leader = self.rng.randrange(NUM_SEATS)
            state = replace(state, turn=leader, trick_leader=leader)
            self.last_tribute = None
            tribute_log = None
        else:
            state, tribute_log = self._tribute_phase(state, level)
        self.round = state
        if self.log is not None:
            self.log.append(
                {
                    "event": "round_start",
                    "round": self.episode.round_index,
                    "level": level,
                    "team_levels": list(self.episode.team_levels),
                    "leader": state.turn,
                    "hands": [
                        [card_str(i) for i in h.indices()] for h in state.hands
                    ],
                    "tribute": tribute_log,
                }
            )

    def _tribute_phase(self, state: RoundState, level: int):
        plan = tribute_plan(self.prev_result, state.hands, level)
        self.last_tribute = plan
        hands = list(state.hands)
        log = {
            "annulled": plan.annulled,
            "payments": [],
            "returns": [],
            "leader": plan.leader,
        }
        returns = []
        for payer, receiver, card in plan.payments:
            hands[payer] = hands[payer].remove(card)
            hands[receiver] = hands[receiver].add(card)
            log["payments"].append(
                {"payer": payer, "receiver": receiver, "card": card_str(card)}
            )
        for payer, receiver, card in plan.payments:
            if self.return_chooser is not None:
                back = self.return_chooser(receiver, hands[receiver], level, payer)
                if hands[receiver].counts[back] == 0:
                    raise IllegalMove("return card not in hand")
                if RANK_POINT.get(card_rank(back), 99) > 10:
                    raise IllegalMove("tribute return must be 10 or lower")
            else:
                back = tribute_return(hands[receiver], level)
            returns.append((receiver, payer, back))
            hands[receiver] = hands[receiver].remove(back)
            hands[payer] = hands[payer].add(back)
            log["returns"].append(
                {"payer": receiver, "receiver": payer, "card": card_str(back)}
            )
        return (
            replace(state, hands=tuple(hands), turn=plan.leader, trick_leader=plan.leader),
            log,
        )

    # -- play --------------------------------------------------------------

    @property
    def over(self) -> bool:
        return (
            self.episode.episode_winner is not None
            or self.episode.round_index > self.max_rounds
        )

    @property
    def seat_to_act(self) -> int:
        return self.round.turn

    def legal_actions(self) -> list[Combo]:
        return movegen.legal_actions(
            self.round.hands[self.round.turn], self.round.to_beat(), self.round.level
        )

    def play(self, combo: Combo) -> RoundResult | None:
        """Apply one action; returns the RoundResult when it ends the round."""
        if self.over:
            raise IllegalMove("episode is over")
        seat = self.round.turn
        self.round = step(self.round, combo)
        if self.log is not None:
            self.log.append(
                {
                    "event": "play",
                    "round": self.episode.round_index,
                    "seat": seat,
                    "combo": combo_str_full(combo),
                    "kind": int(combo.kind),
                    "key": combo.key_rank,
                }
            )
        result = round_over(self.round)
        if result is None:
            return None
        self._finish_round(result)
        return result

    def _finish_round(self, result: RoundResult):
        new_episode = apply_promotion(self.episode, result)
        episode_done = new_episode.episode_winner is not None
        if not episode_done and new_episode.round_index > self.max_rounds:
            episode_done = True
            new_episode.episode_winner = self._cap_winner(result, new_episode)
        values = round_values(result.promotion, result.winning_team, episode_done)
        self.round_records.append(RoundRecord(result, values, episode_done))
        if self.log is not None:
            self.log.append(
                {
                    "event": "round_end",
                    "round": self.episode.round_index,
                    "finish_order": list(result.finish_order),
                    "roles": list(result.roles),
                    "winning_team": result.winning_team,
                    "promotion": result.promotion,
                    "values": values,
                }
            )
        self.prev_result = result
        self.episode = new_episode
        if episode_done:
            if self.log is not None:
                self.log.append(
                    {
                        "event": "episode_end",
                        "winner_team": self.episode_winner,
                        "team_levels": list(new_episode.team_levels),
                        "rounds": len(self.round_records),
                    }
                )
            return
        self._start_round()

    def _cap_winner(self, last_result: RoundResult, ep: EpisodeState) -> int:
        """Round cap reached: higher level wins, ties to the last round winner."""
        a, b = ep.team_levels
        if a != b:
            return 0 if a > b else 1
        return last_result.winning_team

    @property
    def episode_winner(self) -> int | None:
        return self.episode.episode_winner

    def dump_log(self) -> str:
        if self.log is None:
            raise ValueError("episode was created without record_log")
        return "\n".join(json.dumps(e) for e in self.log)


def replay(log_text: str):
    """Re-simulate a dumped episode log, yielding (event, RoundState or None).

    Raises if the log is inconsistent with the rules.
    """
    state: RoundState | None = None
    for line in log_text.splitlines():
        if not line.strip():
            continue
        event = json.loads(line)
        if event["event"] == "round_start":
            hands = tuple(
                CardSet.from_indices(parse_card(t) for t in hand)
                for hand in event["hands"]
            )
            state = RoundState(
                hands=hands,
                turn=event["leader"],
                trick_leader=event["leader"],
                last_play=None,
                consecutive_passes=0,
                finish_order=(),
                played=tuple(CardSet.empty() for _ in range(NUM_SEATS)),
                last_moves=(None, None, None, None),
                level=event["level"],
            )
        elif event["event"] == "play":
            combo = _combo_from_log(event, state.level)
            if event["seat"] != state.turn:
                raise ValueError("log seat does not match engine turn")
            state = step(state, combo)
        yield event, state


def _combo_from_log(event: dict, level: int) -> Combo:
    text = event["combo"]
    if text == "Pass":
        return PASS
    _, cards = text.split(":", 1)
    cs = CardSet.from_tokens(cards)
    return Combo(ComboKind(event["kind"]), cs, event["key"])

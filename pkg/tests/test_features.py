"""State/action encoders: layout, conservation, wild flags, policy inputs."""

import random

import numpy as np
import pytest

from guandan.cards import (
    CardSet, ComboKind, PASS, parse_combo, wild_index,
)
from guandan.engine import Episode, EpisodeState, RoundState, partner_of
from guandan.features import (
    ACTION_DIM, COUNTS_SLICE, HAND_SLICE, LEVELS_SLICE, PARTNER_SLICE,
    PLAYED_SLICE, Q_INPUT_DIM, STATE_DIM, TO_BEAT_SLICE, UNSEEN_SLICE,
    WILD_FLAG_KINDS, WILD_SLICE, View, encode_action, encode_state, ppo_input,
    ppo_input_dim, q_input, q_inputs, view_for,
)
from guandan.movegen import legal_leads


def fresh_state(seed=0, level=0):
    from guandan.engine import deal
    return deal(seed, level)


def view_of(seed=0, level=0, seat=None):
    state = fresh_state(seed, level)
    ep = EpisodeState(team_levels=[level, level], current_level=level)
    return view_for(state.turn if seat is None else seat, state, ep)


def play_some(seed, plies):
    ep = Episode(seed=seed)
    rng = random.Random(seed)
    for _ in range(plies):
        if ep.over:
            break
        ep.play(rng.choice(ep.legal_actions()))
    return ep


# ---------------------------------------------------------------------------
# shapes and layout
# ---------------------------------------------------------------------------

def test_dimensions():
    assert STATE_DIM == 513
    assert ACTION_DIM == 54
    assert Q_INPUT_DIM == 567
    vec = encode_state(view_of())
    assert vec.shape == (STATE_DIM,) and vec.dtype == np.float32


def test_slices_partition_the_state_vector():
    slices = [HAND_SLICE, UNSEEN_SLICE, TO_BEAT_SLICE, PARTNER_SLICE,
              COUNTS_SLICE, PLAYED_SLICE, LEVELS_SLICE, WILD_SLICE]
    edges = []
    for s in slices:
        edges.append((s.start, s.stop))
    assert edges[0][0] == 0 and edges[-1][1] == STATE_DIM
    for (a, b), (c, d) in zip(edges, edges[1:]):
        assert b == c


def test_encode_action_counts_and_pass():
    combo = parse_combo("Pair:99", 0)
    vec = encode_action(combo)
    assert vec.shape == (ACTION_DIM,)
    assert vec.sum() == 2
    assert all(vec[i] == combo.cards.counts[i] for i in range(54))
    assert encode_action(PASS).sum() == 0
    assert encode_action(None).sum() == 0


def test_fresh_deal_state_blocks():
    view = view_of(seed=3, level=5)
    vec = encode_state(view)
    # own hand: 27 cards
    assert vec[HAND_SLICE].sum() == 27
    # nothing played: unseen = deck minus own hand
    assert vec[UNSEEN_SLICE].sum() == 108 - 27
    assert np.all(vec[TO_BEAT_SLICE] == 0)
    assert np.all(vec[PARTNER_SLICE] == 0)
    counts = vec[COUNTS_SLICE].reshape(3, 28)
    assert np.array_equal(counts.sum(axis=1), np.ones(3))
    assert np.all(counts[:, 27] == 1)  # everyone still holds 27
    assert np.all(vec[PLAYED_SLICE] == 0)
    levels = vec[LEVELS_SLICE]
    assert levels.sum() == 3
    assert levels[5] == 1 and levels[13 + 5] == 1 and levels[26 + 5] == 1


def test_card_conservation_through_play():
    ep = play_some(seed=8, plies=60)
    state = ep.round
    for seat in range(4):
        view = view_for(seat, state, ep.episode)
        vec = encode_state(view)
        total = vec[HAND_SLICE] + vec[UNSEEN_SLICE]
        for p in view.played:
            total = total + np.frombuffer(p.counts, dtype=np.uint8)
        assert np.array_equal(total, np.full(54, 2.0))


def test_unseen_never_negative():
    for seed in (1, 2, 3):
        ep = play_some(seed=seed, plies=90)
        for seat in range(4):
            vec = encode_state(view_for(seat, ep.round, ep.episode))
            assert vec[UNSEEN_SLICE].min() >= 0


def test_to_beat_block_reflects_last_play():
    ep = Episode(seed=1)
    combo = next(c for c in ep.legal_actions() if not c.is_pass())
    seat = ep.seat_to_act
    ep.play(combo)
    view = view_for(ep.seat_to_act, ep.round, ep.episode)
    vec = encode_state(view)
    assert np.array_equal(
        vec[TO_BEAT_SLICE], np.frombuffer(combo.cards.counts, dtype=np.uint8))
    assert view.to_beat.identity() == combo.identity()
    # the player who acted shows up in last_moves
    assert view.last_moves[seat].identity() == combo.identity()


def test_partner_block_shows_partner_combo():
    ep = Episode(seed=2)
    lead_seat = ep.seat_to_act
    watcher = partner_of(lead_seat)
    combo = next(c for c in ep.legal_actions() if not c.is_pass())
    ep.play(combo)
    vec = encode_state(view_for(watcher, ep.round, ep.episode))
    assert np.array_equal(
        vec[PARTNER_SLICE], np.frombuffer(combo.cards.counts, dtype=np.uint8))


def test_partner_block_is_minus_one_after_partner_finishes():
    view = view_of(seed=4)
    view.hand_sizes = tuple(
        0 if s == partner_of(view.seat) else n
        for s, n in enumerate(view.hand_sizes))
    vec = encode_state(view)
    assert np.all(vec[PARTNER_SLICE] == -1.0)


def test_partner_pass_encodes_as_zero():
    view = view_of(seed=4)
    moves = list(view.last_moves)
    moves[partner_of(view.seat)] = PASS
    view.last_moves = tuple(moves)
    vec = encode_state(view)
    assert np.all(vec[PARTNER_SLICE] == 0.0)


def test_encoding_ignores_hidden_opponent_cards():
    state = fresh_state(seed=9, level=0)
    ep = EpisodeState()
    # swap the two opponents' entire hands; seat 0 cannot tell
    hands = list(state.hands)
    hands[1], hands[3] = hands[3], hands[1]
    from dataclasses import replace
    swapped = replace(state, hands=tuple(hands))
    a = encode_state(view_for(0, state, ep))
    b = encode_state(view_for(0, swapped, ep))
    assert np.array_equal(a, b)


def test_view_json_roundtrip():
    ep = play_some(seed=12, plies=40)
    for seat in range(4):
        view = view_for(seat, ep.round, ep.episode)
        back = View.from_json(view.to_json())
        assert np.array_equal(encode_state(view), encode_state(back))
        assert back.hand == view.hand
        assert back.finish_order == view.finish_order


def test_view_exposes_only_own_hand():
    ep = play_some(seed=13, plies=10)
    for seat in range(4):
        d = view_for(seat, ep.round, ep.episode).to_json()
        assert len(d["hand"]) == ep.round.hands[seat].size()
        # the payload carries one hand only; everyone else is sizes + played
        assert sorted(d.keys()) == sorted([
            "seat", "hand", "to_beat", "last_moves", "hand_sizes", "played",
            "my_level", "opp_level", "current_level", "turn", "trick_leader",
            "finish_order", "round_index"])


# ---------------------------------------------------------------------------
# wild flags
# ---------------------------------------------------------------------------

def wild_flag_oracle(hand: CardSet, level: int):
    """Ground truth from the move generator: a flag is on iff some lead of
    that kind consumes at least one wild card."""
    widx = wild_index(level)
    on = {kind: False for kind in WILD_FLAG_KINDS}
    if hand.counts[widx]:
        for combo in legal_leads(hand, level):
            if combo.kind in on and combo.cards.counts[widx]:
                on[combo.kind] = True
    return [1.0 if on[kind] else 0.0 for kind in WILD_FLAG_KINDS]


def test_wild_flags_header_bits():
    state = fresh_state(seed=0, level=0)
    ep = EpisodeState()
    for seat in range(4):
        view = view_for(seat, state, ep)
        vec = encode_state(view)
        w = view.hand.counts[wild_index(0)]
        assert vec[WILD_SLICE][0] == (1.0 if w >= 1 else 0.0)
        assert vec[WILD_SLICE][1] == (1.0 if w == 2 else 0.0)
        assert np.all(vec[WILD_SLICE][10:] == 0)


def test_wild_flags_match_movegen_oracle():
    rng = random.Random(606)
    for trial in range(200):
        level = rng.randrange(13)
        widx = wild_index(level)
        deck = [i for i in range(54) for _ in range(2) if i != widx]
        rng.shuffle(deck)
        n_wild = rng.randint(1, 2)
        hand = CardSet.from_indices(
            deck[: rng.randint(1, 8)] + [widx] * n_wild)
        view = view_of(seed=trial, level=level)
        view.hand = hand
        view.current_level = level
        got = encode_state(view)[WILD_SLICE][2:10]
        assert list(got) == wild_flag_oracle(hand, level), (
            f"{hand!r} level={level}")


def test_wildless_hand_has_no_flags():
    view = view_of(seed=21, level=7)
    widx = wild_index(7)
    if view.hand.counts[widx]:
        view.hand = view.hand.remove(widx, view.hand.counts[widx])
    vec = encode_state(view)
    assert np.all(vec[WILD_SLICE] == 0)


# ---------------------------------------------------------------------------
# q and policy inputs
# ---------------------------------------------------------------------------

def test_q_input_concatenates():
    view = view_of(seed=5)
    state_vec = encode_state(view)
    combo = parse_combo("Single:7", 0)
    q = q_input(state_vec, encode_action(combo))
    assert q.shape == (Q_INPUT_DIM,)
    assert np.array_equal(q[:STATE_DIM], state_vec)
    assert np.array_equal(q[STATE_DIM:], encode_action(combo))


def test_q_inputs_batch_matches_single():
    view = view_of(seed=6)
    state_vec = encode_state(view)
    combos = [PASS, parse_combo("Single:7", 0), parse_combo("Pair:99", 0)]
    batch = q_inputs(state_vec, combos)
    assert batch.shape == (3, Q_INPUT_DIM)
    for i, c in enumerate(combos):
        assert np.array_equal(batch[i], q_input(state_vec, encode_action(c)))


def test_ppo_input_padding_and_mask():
    view = view_of(seed=7)
    state_vec = encode_state(view)
    combos = [parse_combo("Single:7", 0)]
    k = 3
    vec, legal = ppo_input(state_vec, combos, k)
    assert vec.shape == (ppo_input_dim(k),)
    assert ppo_input_dim(k) == STATE_DIM + 54 * k + k
    assert np.array_equal(legal, [1.0, 0.0, 0.0])
    base = STATE_DIM
    assert np.array_equal(vec[base : base + 54], encode_action(combos[0]))
    assert np.all(vec[base + 54 : base + 3 * 54] == -1.0)
    assert np.array_equal(vec[base + 3 * 54 :], legal)


def test_ppo_input_full_slate():
    view = view_of(seed=7)
    state_vec = encode_state(view)
    combos = [parse_combo("Single:7", 0), parse_combo("Pair:99", 0)]
    vec, legal = ppo_input(state_vec, combos, 2)
    assert np.array_equal(legal, [1.0, 1.0])
    assert np.all(vec[: STATE_DIM] == state_vec)


def test_ppo_input_rejects_bad_candidate_counts():
    view = view_of(seed=7)
    state_vec = encode_state(view)
    with pytest.raises(ValueError):
        ppo_input(state_vec, [], 2)
    with pytest.raises(ValueError):
        ppo_input(state_vec, [PASS, PASS, PASS], 2)

"""Card identities, combo classification and the covering order.

The referee here is deliberately dumb: enumerate every wild substitution
and check each combo definition directly on the concrete multiset.  The
fast classifier must agree exactly.
"""

import itertools
from functools import lru_cache

import pytest

from guandan.cards import (
    BJ_INDEX, RJ_INDEX, RANK_A, RANK_BJ, RANK_RJ, CardSet, Combo, ComboKind,
    PASS, card_index, card_rank, card_str, card_suit, classify, combo_str,
    combo_str_full, compare, covers, parse_card, parse_combo, seq_rank,
    seq_windows, single_order, wild_index,
)


def cs(tokens: str) -> CardSet:
    return CardSet.from_tokens(tokens)


def kinds_of(tokens: str, level: int):
    return {(int(c.kind), c.key_rank) for c in classify(cs(tokens), level)}


# ---------------------------------------------------------------------------
# definitional referee
# ---------------------------------------------------------------------------

@lru_cache(maxsize=200000)
def _definitional(virtual: tuple) -> frozenset:
    """All (kind, key) a concrete multiset forms, straight from the rules."""
    n = len(virtual)
    ranks = sorted(card_rank(i) for i in virtual)
    out = set()
    if n == 1:
        out.add((int(ComboKind.SINGLE), ranks[0]))
    if n == 2 and ranks[0] == ranks[1]:
        out.add((int(ComboKind.PAIR), ranks[0]))
    if n == 3 and ranks[0] == ranks[2] and ranks[0] <= 12:
        out.add((int(ComboKind.TRIPLE), ranks[0]))
    if 4 <= n <= 10 and ranks[0] == ranks[-1] and ranks[0] <= 12:
        out.add((int(ComboKind.BOMB), ranks[0]))
    if n == 4 and ranks == [RANK_BJ, RANK_BJ, RANK_RJ, RANK_RJ]:
        out.add((int(ComboKind.JOKER_BOMB), 0))
    if n == 5 and all(r <= 12 for r in ranks):
        hist = {r: ranks.count(r) for r in set(ranks)}
        if sorted(hist.values()) == [2, 3]:
            triple = [r for r, c in hist.items() if c == 3][0]
            out.add((int(ComboKind.FULL_HOUSE), triple))
        for start in range(10):
            want = [seq_rank(start + j) for j in range(5)]
            if sorted(want) == ranks:
                out.add((int(ComboKind.STRAIGHT), start))
                suits = {card_suit(i) for i in virtual}
                if len(suits) == 1:
                    out.add((int(ComboKind.STRAIGHT_FLUSH), start))
    if n == 6 and all(r <= 12 for r in ranks):
        hist = {r: ranks.count(r) for r in set(ranks)}
        if sorted(hist.values()) == [2, 2, 2]:
            for start in range(12):
                want = sorted(seq_rank(start + j) for j in range(3))
                if want == sorted(hist) and all(hist[r] == 2 for r in want):
                    out.add((int(ComboKind.TUBE), start))
        if sorted(hist.values()) == [3, 3]:
            for start in range(13):
                want = sorted(seq_rank(start + j) for j in range(2))
                if want == sorted(hist) and all(hist[r] == 3 for r in want):
                    out.add((int(ComboKind.PLATE), start))
    return frozenset(out)


def referee(cards: CardSet, level: int):
    """Every interpretation via exhaustive wild substitution."""
    widx = wild_index(level)
    w = cards.counts[widx]
    naturals = []
    for i in cards.indices():
        if i != widx:
            naturals.append(i)
    naturals = tuple(naturals)
    out = set()
    subs = itertools.combinations_with_replacement(range(52), w)
    for sub in subs:
        impersonating = [x for x in sub if x != widx]
        virtual = tuple(sorted(naturals + sub))
        for kind, key in _definitional(virtual):
            # wilds never impersonate in Singles, and never fill joker slots
            if kind == int(ComboKind.SINGLE) and impersonating:
                continue
            if kind == int(ComboKind.JOKER_BOMB) and w:
                continue
            # rank-keyed kinds: the level rank plays at its natural spot in
            # sequences but keys Singles/Pairs/etc. by its own rank, which
            # classify reports as the plain rank too
            out.add((kind, key))
    return out


# ---------------------------------------------------------------------------
# identities and notation
# ---------------------------------------------------------------------------

def test_card_layout_is_a_bijection():
    seen = set()
    for i in range(54):
        tok = card_str(i)
        assert parse_card(tok) == i
        seen.add(tok)
    assert len(seen) == 54
    assert card_str(BJ_INDEX) == "BJ" and card_str(RJ_INDEX) == "RJ"
    assert parse_card("H2") == 0 and parse_card("C2") == 3
    assert card_rank(parse_card("SA")) == RANK_A


def test_full_deck_counts():
    deck = CardSet.full_deck()
    assert deck.size() == 108
    assert all(c == 2 for c in deck.counts)


def test_cardset_rejects_more_than_two_copies():
    with pytest.raises(ValueError):
        CardSet.from_indices([0, 0, 0])


def test_cardset_roundtrip_multiset():
    hand = cs("H2 H2 S5 BJ RJ RJ")
    assert sorted(card_str(i) for i in hand.indices()) == sorted(
        "H2 H2 S5 BJ RJ RJ".split())
    assert hand.size() == 6


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def test_pair_of_threes():
    assert kinds_of("S3 S3", 0) == {(int(ComboKind.PAIR), 1)}


def test_joker_bomb_multiset():
    assert kinds_of("BJ BJ RJ RJ", 0) == {(int(ComboKind.JOKER_BOMB), 0)}


def test_wild_completes_nine_bomb():
    # level 2: H2 is wild; with three nines the only size-4 reading is a bomb
    assert kinds_of("H2 S9 C9 D9", 0) == {(int(ComboKind.BOMB), 7)}


def test_single_level_card_keeps_its_rank_key():
    combos = classify(cs("H5"), 3)
    assert len(combos) == 1
    c = next(iter(combos))
    assert c.kind == ComboKind.SINGLE and c.key_rank == 3


def test_wild_never_impersonates_in_singles():
    assert kinds_of("H5", 3) == {(int(ComboKind.SINGLE), 3)}


def test_two_wilds_form_any_pair_with_one_natural():
    # H3 H3 at level 3: as naturals a pair of 3s; as wilds any pair at all
    got = kinds_of("H3 H3", 1)
    pairs = {key for kind, key in got if kind == int(ComboKind.PAIR)}
    assert pairs == set(range(13))


def test_mixed_jokers_are_nothing():
    assert kinds_of("BJ RJ", 0) == set()


def test_jokers_may_not_join_sequences_or_fullhouses():
    assert kinds_of("S5 S6 S7 S8 BJ", 0) == set()
    assert kinds_of("SK CK DK BJ BJ", 0) == set()


def test_wild_cannot_fill_joker_pair():
    # one BJ + wild does not make a joker pair
    assert kinds_of("BJ H2", 0) == set()


def test_ace_low_and_high_straights():
    low = classify(cs("HA S2 S3 S4 S5"), 5)
    assert {(c.kind, c.key_rank) for c in low} == {(ComboKind.STRAIGHT, 0)}
    high = classify(cs("H10 SJ SQ SK SA"), 5)
    assert {(c.kind, c.key_rank) for c in high} == {(ComboKind.STRAIGHT, 9)}


def test_straight_flush_needs_one_suit():
    # 5..9 occupy window positions 4..8
    sf = kinds_of("H5 H6 H7 H8 H9", 0)
    assert (int(ComboKind.STRAIGHT_FLUSH), 4) in sf
    plain = kinds_of("H5 S6 H7 H8 H9", 0)
    assert (int(ComboKind.STRAIGHT_FLUSH), 4) not in plain
    assert (int(ComboKind.STRAIGHT), 4) in plain


def test_fullhouse_keyed_by_triple():
    got = kinds_of("S9 C9 D9 SK CK", 0)
    assert got == {(int(ComboKind.FULL_HOUSE), 7)}


def test_tube_and_plate():
    assert (int(ComboKind.TUBE), 2) in kinds_of("S3 C3 S4 C4 S5 C5", 0)
    assert (int(ComboKind.PLATE), 3) in kinds_of("S4 C4 D4 S5 C5 D5", 0)


def test_classify_rejects_empty_set():
    with pytest.raises(ValueError):
        classify(CardSet.empty(), 0)


@pytest.mark.parametrize("tokens,level", [
    ("H2 S9 C9 D9", 0),
    ("H5 H5 S8 C8", 3),
    ("H4 S4 C4 D4", 2),
    ("H6 S7 D8 C9 S10", 4),
    ("H6 H6 S7 D8 S10", 4),
    ("HQ HK HA H10 HJ", 11),
    ("H3 H3 BJ BJ", 1),
    ("H2 H2 S3 C3 D3", 0),
    ("HA HA S2 S2 C3", 12),
    ("H7 S7 C7 H8 S8 C8", 0),
])
def test_classifier_matches_referee_on_wild_hands(tokens, level):
    got = kinds_of(tokens, level)
    assert got == referee(cs(tokens), level)


def test_classifier_matches_referee_reduced_deck_sweep():
    """Exhaustive: every multiset of <=6 cards over ranks 2-5 (all suits)
    plus jokers, checked at every level in 2..5."""
    identities = [card_index(r, s) for r in range(4) for s in range(4)]
    identities += [BJ_INDEX, RJ_INDEX]
    checked = 0
    for size in range(1, 7):
        for combo in itertools.combinations_with_replacement(identities, size):
            if any(combo.count(i) > 2 for i in set(combo)):
                continue
            hand = CardSet.from_indices(combo)
            for level in range(4):
                got = {(int(c.kind), c.key_rank) for c in classify(hand, level)}
                assert got == referee(hand, level), (
                    f"{[card_str(i) for i in combo]} level={level}")
                checked += 1
    assert checked > 100000


def test_classifier_matches_referee_sampled_full_deck():
    import random
    rng = random.Random(20260815)
    deck = []
    for i in range(54):
        deck += [i, i]
    for trial in range(400):
        size = rng.randint(4, 6)
        hand = CardSet.from_indices(rng.sample(deck, size))
        level = rng.randrange(13)
        got = {(int(c.kind), c.key_rank) for c in classify(hand, level)}
        assert got == referee(hand, level), (
            f"{[card_str(i) for i in hand.indices()]} level={level}")


def test_wildless_classification_is_level_independent():
    import random
    rng = random.Random(7)
    deck = [i for i in range(54) for _ in range(2)]
    for trial in range(200):
        hand = CardSet.from_indices(rng.sample(deck, rng.randint(1, 6)))
        base = None
        for level in range(13):
            if hand.counts[wild_index(level)]:
                continue
            got = {(int(c.kind), c.key_rank) for c in classify(hand, level)}
            if base is None:
                base = got
            else:
                assert got == base


# ---------------------------------------------------------------------------
# ordering and covering
# ---------------------------------------------------------------------------

def test_single_order_level_above_ace_below_jokers():
    level = 3  # fives
    assert single_order(3, level) > single_order(RANK_A, level)
    assert single_order(RANK_BJ, level) > single_order(3, level)
    assert single_order(RANK_RJ, level) > single_order(RANK_BJ, level)


def test_ace_low_straight_is_lowest():
    a_low = parse_combo("Straight:A2345", 0)
    two_high = parse_combo("Straight:23456", 0)
    assert a_low.key_rank == 0 and two_high.key_rank == 1
    assert covers(two_high, a_low, 0)
    assert not covers(a_low, two_high, 0)


def test_same_kind_requires_strictly_greater():
    pk = parse_combo("Pair:KK", 0)
    assert not covers(pk, pk, 0)
    assert covers(parse_combo("Pair:AA", 0), pk, 0)
    assert not covers(parse_combo("Pair:QQ", 0), pk, 0)


def test_level_pair_beats_ace_pair():
    lv = 5  # sevens are the level
    assert covers(parse_combo("Pair:77", lv), parse_combo("Pair:AA", lv), lv)


def test_cross_kind_never_covers_without_bomb():
    assert not covers(parse_combo("Pair:KK", 0), parse_combo("Single:A", 0), 0)
    assert not covers(parse_combo("Triple:888", 0),
                      parse_combo("Pair:99", 0), 0)


def test_bomb_ladder():
    b4 = parse_combo("Bomb:9999", 0)
    b5 = parse_combo("Bomb:44444", 0)
    sf = parse_combo("StraightFlush:H5 H6 H7 H8 H9", 0)
    b6 = parse_combo("Bomb:222222", 0)
    jb = parse_combo("JokerBomb:BJ BJ RJ RJ", 0)
    single = parse_combo("Single:A", 0)
    # any bomb covers non-bombs
    for bomb in (b4, b5, sf, b6, jb):
        assert covers(bomb, single, 0)
    # ladder: 4 < 5 < SF < 6 ... < JB
    assert covers(b5, b4, 0) and not covers(b4, b5, 0)
    assert covers(sf, b5, 0) and covers(sf, parse_combo("Bomb:AAAAA", 0), 0)
    assert not covers(sf, b6, 0)
    assert covers(b6, sf, 0)
    assert covers(jb, parse_combo("Bomb:22222222", 0), 0)
    assert covers(jb, b6, 0) and covers(jb, sf, 0)
    assert compare(jb, sf, 0) and not compare(sf, jb, 0)


def test_bigger_bombs_by_size_then_rank():
    assert covers(parse_combo("Bomb:33333", 0), parse_combo("Bomb:AAAA", 0), 0)
    assert covers(parse_combo("Bomb:AAAA", 0), parse_combo("Bomb:KKKK", 0), 0)
    assert not covers(parse_combo("Bomb:KKKK", 0), parse_combo("Bomb:AAAA", 0), 0)


def test_straight_flush_vs_straight_flush_by_key():
    lo = parse_combo("StraightFlush:H2 H3 H4 H5 H6", 0)
    hi = parse_combo("StraightFlush:S5 S6 S7 S8 S9", 0)
    assert covers(hi, lo, 0) and not covers(lo, hi, 0)


def test_compare_antisymmetric_within_tier():
    import random
    rng = random.Random(3)
    deck = [i for i in range(54) for _ in range(2)]
    seen = 0
    while seen < 300:
        a_cards = CardSet.from_indices(rng.sample(deck, rng.randint(1, 6)))
        b_cards = CardSet.from_indices(rng.sample(deck, rng.randint(1, 6)))
        level = rng.randrange(13)
        ca = classify(a_cards, level)
        cb = classify(b_cards, level)
        if not ca or not cb:
            continue
        a = min(ca, key=lambda c: c.identity())
        b = min(cb, key=lambda c: c.identity())
        seen += 1
        assert not (covers(a, b, level) and covers(b, a, level))
        assert not covers(a, a, level)


# ---------------------------------------------------------------------------
# notation round trips
# ---------------------------------------------------------------------------

def test_combo_text_roundtrip():
    # card order inside the text follows deck index order, so A sits last
    for text in ["Pair:KK", "Single:7", "Bomb:9999", "Straight:2345A",
                 "FullHouse:999KK", "Tube:334455", "Plate:444555"]:
        c = parse_combo(text, 0)
        assert combo_str(c) == text
        again = parse_combo(combo_str_full(c), 0)
        assert again.identity() == c.identity()


def test_pass_formatting():
    assert combo_str(PASS) == "Pass"
    assert parse_combo("Pass", 0).is_pass()

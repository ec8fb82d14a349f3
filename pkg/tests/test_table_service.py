"""Live table protocol: seating, views, acting, tribute, transports."""

import asyncio
import base64
import hashlib
import json
import random
import struct

import pytest

from guandan.cards import CardSet, RANK_POINT, card_rank, card_str, classify
from guandan.engine import tribute_return
from guandan.table_service import (
    Connection, TableService, WS_GUID,
)

BOTS = ["random", "random", "random", "random"]
ONE_HUMAN = ["human", "random", "random", "random"]


def run(coro, timeout=90.0):
    return asyncio.run(asyncio.wait_for(coro, timeout))


async def start_service(specs, **kw):
    kw.setdefault("seed", 3)
    kw.setdefault("max_rounds", 1)
    kw.setdefault("heartbeat", 0.0)
    svc = TableService(specs, **kw)
    server = await svc.start(port=0)
    port = server.sockets[0].getsockname()[1]
    return svc, port


async def read_msg(reader):
    line = await asyncio.wait_for(reader.readline(), 30.0)
    assert line, "server closed unexpectedly"
    return json.loads(line)


def send_msg(writer, msg):
    writer.write(json.dumps(msg).encode() + b"\n")


# ---------------------------------------------------------------------------
# bot-only tables
# ---------------------------------------------------------------------------

def test_bots_only_episode_completes_and_logs():
    async def main():
        svc = TableService(BOTS, seed=5, max_rounds=1, heartbeat=0.0)
        ep = await svc.play_episode()
        assert ep.over
        return svc.episode_log()

    log = run(main())
    events = [json.loads(l) for l in log.splitlines()]
    assert events[0]["event"] == "round_start"
    assert events[-1]["event"] == "episode_end"


def test_bot_episode_deterministic_per_seed():
    def one():
        async def main():
            svc = TableService(BOTS, seed=9, max_rounds=1, heartbeat=0.0)
            await svc.play_episode()
            return svc.episode_log()
        return run(main())

    assert one() == one()


def test_four_seat_specs_required():
    with pytest.raises(ValueError, match="four seat"):
        TableService(["random"] * 3)


def test_episode_log_before_any_game_raises():
    with pytest.raises(ValueError, match="no episode"):
        TableService(BOTS).episode_log()


# ---------------------------------------------------------------------------
# one human over TCP json lines, full episode
# ---------------------------------------------------------------------------

def test_human_plays_a_full_episode_over_tcp():
    async def main():
        svc, port = await start_service(ONE_HUMAN, seed=3, max_rounds=2)
        serve = asyncio.ensure_future(svc.serve_games(1))
        reader, writer = await asyncio.open_connection(
            "127.0.0.1", port, limit=1 << 22)
        send_msg(writer, {"type": "hello", "seat": 0})
        await writer.drain()

        hello = await read_msg(reader)
        assert hello["type"] == "hello"
        assert hello["you"] == 0
        kinds = [s["kind"] for s in hello["seats"]]
        assert kinds == ["human", "bot", "bot", "bot"]

        seqs = [hello["seq"]]
        game_ids = {hello["game_id"]}
        states = 0
        bot_moves_with_candidates = 0
        tribute_infos = []
        first_action_checked = False
        msg = None
        while True:
            msg = await read_msg(reader)
            seqs.append(msg["seq"])
            game_ids.add(msg["game_id"])
            t = msg["type"]
            if t == "state":
                view = msg["view"]
                assert view["seat"] == 0
                assert len(view["hand"]) == view["hand_sizes"][0]
                states += 1
            elif t == "bot_move":
                if "candidates" in msg:
                    assert 1 <= len(msg["candidates"]) <= 8
                    assert "chosen" in msg
                    bot_moves_with_candidates += 1
            elif t == "tribute_info":
                tribute_infos.append(msg)
            elif t == "legal_actions":
                legal = msg["legal"]
                assert legal[0]["index"] == 0
                if not first_action_checked:
                    # out-of-range index: rejected without consuming the turn
                    send_msg(writer, {"type": "act", "index": 999})
                    await writer.drain()
                    err = await read_msg(reader)
                    assert err["type"] == "error"
                    assert err["code"] == "illegal_action"
                    seqs.append(err["seq"])
                    # then act by explicit card tokens instead of index
                    pick = legal[-1]
                    send_msg(writer, {"type": "act", "cards": pick["cards"],
                                      "kind": pick["kind"]})
                    first_action_checked = True
                else:
                    send_msg(writer, {"type": "act", "index": 0})
                await writer.drain()
            elif t == "episode_end":
                break
        assert msg["winner_team"] in (0, 1)
        assert msg["rounds"] == 2
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        assert game_ids == {f"g3-0"}
        assert states > 10
        assert bot_moves_with_candidates > 10
        assert first_action_checked
        # two rounds were played, so the second one opened with tribute info
        assert len(tribute_infos) == 1
        info = tribute_infos[0]
        assert {"annulled", "payments", "returns", "leader",
                "round"} <= set(info)
        assert info["round"] == 2
        if not info["annulled"]:
            assert len(info["payments"]) in (1, 2)
            for pay in info["payments"]:
                assert {"payer", "receiver", "card"} <= set(pay)
        await asyncio.wait_for(serve, 30.0)
        writer.close()
        await svc.stop()

    run(main(), timeout=120.0)


def test_second_hello_gets_no_seat():
    async def main():
        svc, port = await start_service(ONE_HUMAN)
        r1, w1 = await asyncio.open_connection("127.0.0.1", port)
        send_msg(w1, {"type": "hello"})
        await w1.drain()
        assert (await read_msg(r1))["type"] == "hello"

        r2, w2 = await asyncio.open_connection("127.0.0.1", port)
        send_msg(w2, {"type": "hello"})
        await w2.drain()
        reply = await read_msg(r2)
        assert reply["type"] == "error"
        assert reply["code"] == "no_seat"
        w1.close()
        w2.close()
        await svc.stop()

    run(main())


def test_bot_only_table_refuses_hello():
    async def main():
        svc, port = await start_service(BOTS)
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        send_msg(writer, {"type": "hello"})
        await writer.drain()
        reply = await read_msg(reader)
        assert (reply["type"], reply["code"]) == ("error", "no_seat")
        writer.close()
        await svc.stop()

    run(main())


def test_non_hello_first_message_rejected():
    async def main():
        svc, port = await start_service(ONE_HUMAN)
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        send_msg(writer, {"type": "act", "index": 0})
        await writer.drain()
        reply = await read_msg(reader)
        assert (reply["type"], reply["code"]) == ("error", "protocol")
        writer.close()
        await svc.stop()

    run(main())


def test_garbage_line_reported_malformed():
    async def main():
        svc, port = await start_service(ONE_HUMAN)
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        writer.write(b"zzzz this is not json\n")
        await writer.drain()
        reply = await read_msg(reader)
        assert (reply["type"], reply["code"]) == ("error", "malformed")
        writer.close()
        await svc.stop()

    run(main())


def test_act_timeout_falls_back_and_drops_seat():
    async def main():
        svc, port = await start_service(ONE_HUMAN, seed=4, act_timeout=0.05)
        serve = asyncio.ensure_future(svc.serve_games(1))
        reader, writer = await asyncio.open_connection(
            "127.0.0.1", port, limit=1 << 22)
        send_msg(writer, {"type": "hello"})
        await writer.drain()
        await read_msg(reader)  # hello; then never answer anything
        await asyncio.wait_for(serve, 60.0)
        assert not svc.seats[0].connected
        assert svc.episode is not None and svc.episode.over
        writer.close()
        await svc.stop()

    run(main())


# ---------------------------------------------------------------------------
# unit level: acting and tribute prompts through a fake connection
# ---------------------------------------------------------------------------

class FakeConnection(Connection):
    def __init__(self):
        self.sent = []

    async def send(self, msg):
        self.sent.append(msg)


def wire_human(svc, seat_index=0):
    seat = svc.seats[seat_index]
    seat.conn = FakeConnection()
    seat.inbox = asyncio.Queue()
    return seat


def legal_fixture():
    hand = CardSet.from_tokens("S3 S3 SK")
    from guandan.movegen import legal_actions
    return legal_actions(hand, None, 2)


def test_human_act_validates_and_matches_cards():
    async def main():
        svc = TableService(ONE_HUMAN, heartbeat=0.0)
        seat = wire_human(svc)
        legal = legal_fixture()
        from guandan.features import View

        view = View(seat=0, hand=CardSet.from_tokens("S3 S3 SK"),
                    to_beat=None, last_moves=(None,) * 4,
                    hand_sizes=(3, 3, 3, 3), played=(CardSet.empty(),) * 4,
                    my_level=2, opp_level=2, current_level=2, turn=0,
                    trick_leader=0, finish_order=(), round_index=1)
        seat.inbox.put_nowait({"type": "chat", "text": "hi"})   # ignored
        seat.inbox.put_nowait({"type": "act", "index": 99})     # error
        seat.inbox.put_nowait({"type": "act", "cards": ["SK"]})
        move = await svc._human_act(seat, view, legal)
        assert card_str(next(iter(move.cards.indices()))) == "SK"
        payload = seat.conn.sent[0]
        assert payload["type"] == "legal_actions"
        assert [e["index"] for e in payload["legal"]] == list(range(len(legal)))
        errors = [m for m in seat.conn.sent if m.get("type") == "error"]
        assert len(errors) == 1 and errors[0]["code"] == "illegal_action"

    run(main())


def test_human_act_disconnect_uses_fallback():
    async def main():
        svc = TableService(ONE_HUMAN, heartbeat=0.0)
        seat = wire_human(svc)
        legal = legal_fixture()
        from guandan.features import View
        view = View(seat=0, hand=CardSet.from_tokens("S3 S3 SK"),
                    to_beat=None, last_moves=(None,) * 4,
                    hand_sizes=(3, 3, 3, 3), played=(CardSet.empty(),) * 4,
                    my_level=2, opp_level=2, current_level=2, turn=0,
                    trick_leader=0, finish_order=(), round_index=1)
        seat.inbox.put_nowait(None)  # what the pump enqueues when a peer drops
        move = await svc._human_act(seat, view, legal)
        assert any(move.identity() == c.identity() for c in legal)

    run(main())


def test_tribute_prompt_flow():
    async def main():
        svc = TableService(ONE_HUMAN, heartbeat=0.0)
        seat = wire_human(svc)
        hand = CardSet.from_tokens("S2 H5 SJ SA RJ")
        seat.inbox.put_nowait({"type": "act", "index": 0})        # ignored
        seat.inbox.put_nowait({"type": "tribute_return", "card": "RJ"})
        seat.inbox.put_nowait({"type": "tribute_return", "card": "H5"})
        card = await svc._prompt_return(seat, hand, 2, payer=3)
        assert card_str(card) == "H5"
        prompt = seat.conn.sent[0]
        assert prompt["type"] == "tribute_prompt"
        assert prompt["payer"] == 3
        assert set(prompt["options"]) == {"S2", "H5"}
        errors = [m for m in seat.conn.sent if m.get("type") == "error"]
        assert len(errors) == 1 and errors[0]["code"] == "illegal_return"

    run(main())


def test_return_chooser_for_bots_matches_heuristic():
    svc = TableService(BOTS, heartbeat=0.0)
    hand = CardSet.from_tokens("S2 H5 SJ SA RJ S9 C8 D6")
    assert svc._return_chooser(1, hand, 2, payer=3) == tribute_return(hand, 2)


def test_match_cards_requires_exact_multiset_and_kind():
    legal = legal_fixture()
    pair = next(c for c in legal if c.size == 2)
    got = TableService._match_cards({"cards": ["S3", "S3"]}, legal)
    assert got is pair
    assert TableService._match_cards(
        {"cards": ["S3", "S3"], "kind": int(pair.kind)}, legal) is pair
    assert TableService._match_cards(
        {"cards": ["S3", "S3"], "kind": 1}, legal) is None  # wrong kind
    assert TableService._match_cards({"cards": ["S4"]}, legal) is None
    assert TableService._match_cards({"cards": ["XX"]}, legal) is None
    assert TableService._match_cards({"index": 0}, legal) is None


# ---------------------------------------------------------------------------
# websocket transport
# ---------------------------------------------------------------------------

def ws_encode(payload: bytes, opcode=0x1, mask=b"\x37\xfa\x21\x3d"):
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([0x80 | n])
    elif n < 1 << 16:
        head += bytes([0x80 | 126]) + struct.pack(">H", n)
    else:
        head += bytes([0x80 | 127]) + struct.pack(">Q", n)
    return head + mask + bytes(b ^ mask[i % 4] for i, b in enumerate(payload))


async def ws_read(reader):
    head = await asyncio.wait_for(reader.readexactly(2), 30.0)
    opcode = head[0] & 0x0F
    n = head[1] & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", await reader.readexactly(2))
    elif n == 127:
        (n,) = struct.unpack(">Q", await reader.readexactly(8))
    return opcode, await reader.readexactly(n)


def test_websocket_handshake_and_hello():
    async def main():
        svc, port = await start_service(ONE_HUMAN)
        reader, writer = await asyncio.open_connection(
            "127.0.0.1", port, limit=1 << 22)
        key = base64.b64encode(b"0123456789abcdef").decode()
        writer.write(
            f"GET /ws HTTP/1.1\r\nHost: t\r\nUpgrade: websocket\r\n"
            f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
            f"Sec-WebSocket-Version: 13\r\n\r\n".encode())
        await writer.drain()
        head = await reader.readuntil(b"\r\n\r\n")
        text = head.decode()
        assert text.startswith("HTTP/1.1 101")
        want = base64.b64encode(
            hashlib.sha1((key + WS_GUID).encode()).digest()).decode()
        assert f"Sec-WebSocket-Accept: {want}" in text

        writer.write(ws_encode(json.dumps(
            {"type": "hello", "seat": 0}).encode()))
        await writer.drain()
        opcode, payload = await ws_read(reader)
        assert opcode == 0x1
        reply = json.loads(payload)
        assert reply["type"] == "hello" and reply["you"] == 0

        # ping answered with pong carrying the same payload
        writer.write(ws_encode(b"mark", opcode=0x9))
        await writer.drain()
        opcode, payload = await ws_read(reader)
        assert (opcode, payload) == (0xA, b"mark")

        writer.write(ws_encode(b"", opcode=0x8))
        await writer.drain()
        opcode, _ = await ws_read(reader)
        assert opcode == 0x8
        writer.close()
        await svc.stop()

    run(main())


# ---------------------------------------------------------------------------
# static files
# ---------------------------------------------------------------------------

async def http_get(port, path):
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    writer.write(f"GET {path} HTTP/1.1\r\nHost: t\r\n\r\n".encode())
    await writer.drain()
    raw = await asyncio.wait_for(reader.read(), 30.0)
    writer.close()
    head, _, body = raw.partition(b"\r\n\r\n")
    status = int(head.split(b" ")[1])
    return status, head.decode("latin-1"), body


def test_static_serving_and_traversal_guard(tmp_path):
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html>table</html>")
    (static / "app.js").write_text("console.log(1)")
    (tmp_path / "secret.txt").write_text("keep out")

    async def main():
        svc, port = await start_service(ONE_HUMAN, static_dir=str(static))
        status, head, body = await http_get(port, "/")
        assert status == 200 and body == b"<html>table</html>"
        assert "text/html" in head

        status, head, body = await http_get(port, "/app.js")
        assert status == 200 and b"console" in body
        assert "javascript" in head

        status, _, body = await http_get(port, "/missing.css")
        assert status == 404

        status, _, body = await http_get(port, "/../secret.txt")
        assert status == 404
        assert b"keep out" not in body

        status, _, body = await http_get(port, "/%2e%2e/secret.txt")
        assert b"keep out" not in body
        await svc.stop()

    run(main())


def test_static_disabled_by_default():
    async def main():
        svc, port = await start_service(ONE_HUMAN)
        status, _, _ = await http_get(port, "/index.html")
        assert status == 404
        await svc.stop()

    run(main())

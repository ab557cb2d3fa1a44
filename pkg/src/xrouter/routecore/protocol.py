"""Newline-delimited JSON frames shared by every hop.

    req  {"v":1,"type":"req","id":str,"prompt":str,"max_tokens":int[,"cluster":int][,"t_ns":int]}
    tok  {"v":1,"type":"tok","id":str,"i":int,"text":str,"t_ns":int}
    end  {"v":1,"type":"end","id":str,"n":int,"reason":"eos"|"cap"}
    err  {"v":1,"type":"err","id":str,"code":str,"msg":str[,"t_ns":int]}

``t_ns`` on ``req`` is the sender's virtual send time and on ``err`` the
backend's virtual clock; both are optional and only used to keep
networked runs in step with the backend clock.
"""
import json

from ..errors import MalformedFrame

VERSION = 1
MAX_FRAME_BYTES = 1 << 20

_dumps = json.JSONEncoder(separators=(",", ":"), ensure_ascii=False).encode


def encode(frame: dict) -> bytes:
    return (_dumps(frame) + "\n").encode("utf-8")


def req_frame(id: str, prompt: str, max_tokens: int, cluster: int | None = None, t_ns: int | None = None) -> dict:
    f = {"v": VERSION, "type": "req", "id": id, "prompt": prompt, "max_tokens": max_tokens}
    if cluster is not None:
        f["cluster"] = cluster
    if t_ns is not None:
        f["t_ns"] = t_ns
    return f


def tok_frame(id: str, i: int, text: str, t_ns: int) -> dict:
    return {"v": VERSION, "type": "tok", "id": id, "i": i, "text": text, "t_ns": t_ns}


def end_frame(id: str, n: int, reason: str) -> dict:
    return {"v": VERSION, "type": "end", "id": id, "n": n, "reason": reason}


def err_frame(id: str, code: str, msg: str = "", t_ns: int | None = None) -> dict:
    f = {"v": VERSION, "type": "err", "id": id, "code": code, "msg": msg}
    if t_ns is not None:
        f["t_ns"] = t_ns
    return f


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


_SCHEMA = {
    "req": {"id": str, "prompt": str, "max_tokens": int},
    "tok": {"id": str, "i": int, "text": str, "t_ns": int},
    "end": {"id": str, "n": int, "reason": str},
    "err": {"id": str, "code": str, "msg": str},
}
_OPTIONAL = {"req": {"cluster": int, "t_ns": int}, "err": {"t_ns": int}}


def decode(line: bytes | str) -> dict:
    """Parse and validate one frame; raises MalformedFrame."""
    if isinstance(line, bytes):
        if len(line) > MAX_FRAME_BYTES:
            raise MalformedFrame("frame too large")
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedFrame(f"not utf-8: {e}") from None
    line = line.strip()
    if not line:
        raise MalformedFrame("empty frame")
    try:
        f = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedFrame(f"invalid json: {e.msg}") from None
    if not isinstance(f, dict):
        raise MalformedFrame("frame is not an object")
    if f.get("v") != VERSION:
        raise MalformedFrame(f"unsupported version {f.get('v')!r}")
    kind = f.get("type")
    schema = _SCHEMA.get(kind)
    if schema is None:
        raise MalformedFrame(f"unknown frame type {kind!r}")
    for name, typ in schema.items():
        if name not in f:
            raise MalformedFrame(f"{kind} frame missing {name!r}")
        ok = _is_int(f[name]) if typ is int else isinstance(f[name], typ)
        if not ok:
            raise MalformedFrame(f"{kind}.{name} has wrong type")
    for name, typ in _OPTIONAL.get(kind, {}).items():
        if name in f and f[name] is not None and not _is_int(f[name]):
            raise MalformedFrame(f"{kind}.{name} has wrong type")
    if kind == "req" and f["max_tokens"] < 1:
        raise MalformedFrame("max_tokens must be >= 1")
    if kind == "end" and f["reason"] not in ("eos", "cap"):
        raise MalformedFrame("end.reason must be eos or cap")
    return f


_TERMINAL = (b'"type":"end"', b'"type":"err"')
_TOK_PREFIX = b'{"v":1,"type":"tok"'


def is_terminal(line: bytes) -> bool:
    """Cheap check for end/err on frames produced by :func:`encode`."""
    if line.startswith(_TOK_PREFIX):
        return False
    head = line[:40]
    if any(t in head for t in _TERMINAL):
        return True
    try:
        return decode(line)["type"] in ("end", "err")
    except MalformedFrame:
        return False

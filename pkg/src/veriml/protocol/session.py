"""In-process run of the verification phase between a server and a client."""

from __future__ import annotations

from .client import Transcript, challenge, client_verify
from .server import Server


def run_session(server: Server, c: int, client_randomness: int, backend: str = "transparent") -> Transcript:
    """Commit, challenge, answer with identifier claims, then prove on demand and verify."""
    tr = Transcript(server.commitment)
    tr.record("commit")
    ch = challenge(tr, c, client_randomness)
    tr.responses = [server.respond(i) for i in ch.indices]
    tr.record("respond")
    client_verify(tr, server.spec, server.data, None, backend,
                  request_proof=lambda i: server.prove(i, ch.freivald_seed))
    return tr

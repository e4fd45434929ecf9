"""Toy protocol samplers for end-to-end runs.

lockserv follows the usual message-passing lock-server state machine over the
five-relation vocabulary; its guards and updates are documented on the action
functions below. The `toy` protocol draws independent random models over one
sort with three unary relations (per-tuple coin flips with configurable
density).

Runs are reproducible from (seed, universe sizes, step count).
"""

from __future__ import annotations

import random
from typing import Callable, Mapping, Sequence

from .errors import DeadlockError, ForceError
from .logic import Signature, Structure, make_signature, make_structure
from .bounded import random_structure

Action = tuple[str, tuple[int, ...]]


def lockserv_signature() -> Signature:
    return make_signature(
        ["node", "lock"],
        [
            ("lock_msg", ["node", "lock"]),
            ("grant_msg", ["node", "lock"]),
            ("unlock_msg", ["node", "lock"]),
            ("holds_lock", ["node", "lock"]),
            ("server_holds_lock", ["lock"]),
        ],
    )


def toy_signature() -> Signature:
    return make_signature(["X"], [("p", ["X"]), ("q", ["X"]), ("r", ["X"])])


def _lockserv_initial(sig: Signature, n_nodes: int, n_locks: int) -> Structure:
    return make_structure(
        sig,
        {"node": n_nodes, "lock": n_locks},
        {"server_holds_lock": [(l,) for l in range(n_locks)]},
    )


def _lockserv_actions(m: Structure) -> list[Action]:
    """Enabled concrete actions, in a fixed deterministic order.

    request(n,l):      always enabled; client n sends lock_msg(n,l).
    grant(n,l):        lock_msg(n,l) and server_holds_lock(l); the server
                       consumes both and sends grant_msg(n,l).
    recv_grant(n,l):   grant_msg(n,l); the client takes holds_lock(n,l).
    unlock(n,l):       holds_lock(n,l); the client releases and sends
                       unlock_msg(n,l).
    recv_unlock(n,l):  unlock_msg(n,l); the server reclaims
                       server_holds_lock(l).
    """
    sig = m.signature
    n_nodes = m.sizes[sig.sort("node").index]
    n_locks = m.sizes[sig.sort("lock").index]
    lock_msg, grant_msg, unlock_msg, holds, server = (
        m.interp[sig.relation(r).index]
        for r in ("lock_msg", "grant_msg", "unlock_msg", "holds_lock", "server_holds_lock")
    )
    actions: list[Action] = []
    for n in range(n_nodes):
        for l in range(n_locks):
            actions.append(("request", (n, l)))
            if (n, l) in lock_msg and (l,) in server:
                actions.append(("grant", (n, l)))
            if (n, l) in grant_msg:
                actions.append(("recv_grant", (n, l)))
            if (n, l) in holds:
                actions.append(("unlock", (n, l)))
            if (n, l) in unlock_msg:
                actions.append(("recv_unlock", (n, l)))
    actions.sort()
    return actions


def _lockserv_apply(m: Structure, action: Action) -> Structure:
    sig = m.signature
    name, (n, l) = action
    rel_rows = {r.name: set(rows) for r, rows in zip(sig.relations, m.interp)}
    if name == "request":
        rel_rows["lock_msg"].add((n, l))
    elif name == "grant":
        rel_rows["lock_msg"].discard((n, l))
        rel_rows["server_holds_lock"].discard((l,))
        rel_rows["grant_msg"].add((n, l))
    elif name == "recv_grant":
        rel_rows["grant_msg"].discard((n, l))
        rel_rows["holds_lock"].add((n, l))
    elif name == "unlock":
        rel_rows["holds_lock"].discard((n, l))
        rel_rows["unlock_msg"].add((n, l))
    elif name == "recv_unlock":
        rel_rows["unlock_msg"].discard((n, l))
        rel_rows["server_holds_lock"].add((l,))
    else:
        raise ForceError(f"unknown lockserv action {name}")
    return make_structure(sig, m.sizes, rel_rows)


def _sample_lockserv(
    sizes: Mapping[str, int], steps: int, samples: int, rng: random.Random
) -> list[Structure]:
    sig = lockserv_signature()
    n_nodes, n_locks = sizes.get("node", 2), sizes.get("lock", 1)
    out: list[Structure] = []
    state = _lockserv_initial(sig, n_nodes, n_locks)
    step_in_episode = 0
    total_step = 0
    while len(out) < samples:
        if steps == 0:
            out.append(state)
            continue
        if step_in_episode == steps:
            state = _lockserv_initial(sig, n_nodes, n_locks)
            step_in_episode = 0
        enabled = _lockserv_actions(state)
        if not enabled:
            raise DeadlockError(total_step)
        state = _lockserv_apply(state, enabled[rng.randrange(len(enabled))])
        step_in_episode += 1
        total_step += 1
        out.append(state)
    return out


def _sample_toy(
    sizes: Mapping[str, int], steps: int, samples: int, rng: random.Random, density: float
) -> list[Structure]:
    sig = toy_signature()
    n = sizes.get("X", 3)
    return [random_structure(sig, (n,), rng, density) for _ in range(samples)]


PROTOCOLS: dict[str, Signature] = {
    "lockserv": lockserv_signature(),
    "toy": toy_signature(),
}


def sample_protocol(
    protocol: str,
    sizes: Mapping[str, int],
    steps: int,
    samples: int,
    seed: int,
    density: float = 0.5,
) -> list[Structure]:
    """Sampled states of the named protocol, one Structure per sample."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = random.Random(seed)
    if protocol == "lockserv":
        return _sample_lockserv(sizes, steps, samples, rng)
    if protocol == "toy":
        return _sample_toy(sizes, steps, samples, rng, density)
    raise ForceError(f"unknown protocol {protocol!r} (supported: {', '.join(sorted(PROTOCOLS))})")


def gen_traces(
    protocol: str,
    sizes: Mapping[str, int],
    steps: int,
    samples: int,
    seed: int,
    density: float = 0.5,
) -> str:
    """Trace document for the sampled states (see formats.render_traces)."""
    from .formats import render_traces

    return render_traces(sample_protocol(protocol, sizes, steps, samples, seed, density))

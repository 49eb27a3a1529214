"""Screening one edge at a time, with each answer observed before the next
pick, the way a coordinator would actually run it.

Drives the stateful session layer directly (the same object the HTTP service
exposes), then replays the canonical walkthrough: take the recommendation,
reject it, watch the matching reroute, finalize.
"""

from prescreen.sessions import SessionStore


def main():
    store = SessionStore()  # in-memory; pass storage_dir=... for persistence

    session = store.create_session(
        "interlocking-cycles",
        {
            "distribution": {"kind": "simple"},
            "policy": "max_weight",
            "method": "greedy",
            "budget": 2,
            "seed": 0,
        },
    )
    print(f"session {session.id}: baseline expected weight {session.baseline}")

    step = 1
    while True:
        rec = session.recommendation()
        if rec is None:
            print("budget exhausted, no further recommendation")
            break
        print(f"\nstep {step}: recommend edge {rec['edge_id']} "
              f"({rec['source']} -> {rec['target']}, rejection prob {rec['p_reject']})")
        print(f"   if accepted -> expected weight {rec['accept_expected_weight']}")
        print(f"   if rejected -> expected weight {rec['reject_expected_weight']}")
        # the coordinator reports the real-world answer; here: always rejected
        state = store.record_response(session.id, rec["edge_id"], "rejected")
        matched = [tuple(s["edges"]) for s in state["matching"]["structures"]]
        print(f"   response recorded: rejected; matching now {matched} "
              f"at {state['matching']['expected_weight']}")
        step += 1

    final = store.finalize(session.id)
    print(f"\nfinalized: expected weight {final['expected_weight']}")
    print("run the same flow over HTTP with:  python -m prescreen.service")


if __name__ == "__main__":
    main()

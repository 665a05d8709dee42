
import pytest
from fastapi.testclient import TestClient

from feedeval.metrics import fleiss_kappa
from feedeval.service import (
    PRACTICE_PER_ROUND,
    PRACTICE_ROUNDS,
    AnnotationStore,
    create_app,
)


def practice_definitions():
    tasks = []
    for round_number in (1, 2):
        for i in range(PRACTICE_PER_ROUND):
            tasks.append(
                {
                    "task_id": f"practice-{round_number}-{i}",
                    "kind": "pairwise",
                    "dimension": "specificity",
                    "context": "Practice essay text.",
                    "items": [f"Practice feedback X {i}.", f"Practice feedback Y {i}."],
                    "is_practice": True,
                    "practice_round": round_number,
                }
            )
    return tasks


def main_definitions(count=10, dimension="specificity", machine_winner=0):
    return [
        {
            "task_id": f"main-{dimension}-{i}",
            "kind": "pairwise",
            "dimension": dimension,
            "context": f"Essay text number {i}.",
            "items": [f"Feedback alpha {i}.", f"Feedback beta {i}."],
            "machine_winner": machine_winner,
        }
        for i in range(count)
    ]


def likert_definitions(count=4):
    return [
        {
            "task_id": f"likert-{i}",
            "kind": "likert",
            "context": f"Essay text {i}.",
            "feedback": f"Feedback to rate {i}.",
        }
        for i in range(count)
    ]


def fresh_store(tmp_path, tasks=None, seed=5):
    store = AnnotationStore(tmp_path / "log.jsonl", seed=seed)
    store.load_task_definitions(tasks if tasks is not None else [])
    return store


def make_client(store, **kwargs):
    return TestClient(create_app(store, **kwargs))


def register(client, annotator_id):
    response = client.post("/annotators", json={"annotator_id": annotator_id})
    assert response.status_code == 201
    return response.json()


def drain(client, annotator_id, answer="A", limit=500):
    """Judge every queued task; returns the served task views in order."""
    served = []
    while len(served) < limit:
        response = client.get("/tasks/next", params={"annotator": annotator_id})
        if response.status_code == 204:
            return served
        task = response.json()
        served.append(task)
        payload = {"task_id": task["task_id"], "annotator_id": annotator_id}
        if task["kind"] == "likert":
            payload["ratings"] = [4, 5, 3]
        else:
            payload["winner"] = answer
        assert client.post("/judgments", json=payload).status_code == 200
    return served


# ---------------------------------------------------------------------------
# gating and queue behavior


def test_fresh_annotator_gets_practice_round_one_first(tmp_path):
    store = fresh_store(tmp_path, practice_definitions() + main_definitions())
    client = make_client(store)
    register(client, "a1")
    first = client.get("/tasks/next", params={"annotator": "a1"}).json()
    assert first["is_practice"] is True
    assert first["practice_round"] == 1


def test_main_tasks_only_after_twenty_practice_judgments(tmp_path):
    store = fresh_store(tmp_path, practice_definitions() + main_definitions())
    client = make_client(store)
    register(client, "a1")
    served = drain(client, "a1")
    practice = [t for t in served if t["is_practice"]]
    main = [t for t in served if not t["is_practice"]]
    assert len(practice) == PRACTICE_ROUNDS * PRACTICE_PER_ROUND
    assert len(main) == 10
    # every practice task precedes every main task
    last_practice = max(i for i, t in enumerate(served) if t["is_practice"])
    first_main = min(i for i, t in enumerate(served) if not t["is_practice"])
    assert last_practice < first_main


def test_exhausted_queue_returns_none(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=1))
    client = make_client(store)
    register(client, "a1")
    drain(client, "a1")
    assert client.get("/tasks/next", params={"annotator": "a1"}).status_code == 204


def test_unknown_annotator_rejected(tmp_path):
    store = fresh_store(tmp_path, main_definitions())
    client = make_client(store)
    assert client.get("/tasks/next", params={"annotator": "ghost"}).status_code == 403


def test_main_order_randomized_per_annotator(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=10))
    client = make_client(store)
    register(client, "a1")
    register(client, "a2")
    order_one = [t["task_id"] for t in drain(client, "a1")]
    order_two = [t["task_id"] for t in drain(client, "a2")]
    assert sorted(order_one) == sorted(order_two)
    assert order_one != order_two


def test_same_task_served_to_all_annotators(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=3))
    client = make_client(store)
    for annotator in ("a1", "a2", "a3"):
        register(client, annotator)
        assert len(drain(client, annotator)) == 3


def test_refetch_before_judging_returns_same_task(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=5))
    client = make_client(store)
    register(client, "a1")
    first = client.get("/tasks/next", params={"annotator": "a1"}).json()
    again = client.get("/tasks/next", params={"annotator": "a1"}).json()
    assert first["task_id"] == again["task_id"]


# ---------------------------------------------------------------------------
# judgments


def serve_one(client, annotator):
    return client.get("/tasks/next", params={"annotator": annotator}).json()


def test_valid_judgment_ack_with_sequence(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=2))
    client = make_client(store)
    register(client, "a1")
    task = serve_one(client, "a1")
    response = client.post(
        "/judgments",
        json={"task_id": task["task_id"], "annotator_id": "a1", "winner": "B"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["sequence"] == 1
    assert body["duplicate"] is False


def test_likert_range_validation(tmp_path):
    store = fresh_store(tmp_path, likert_definitions())
    client = make_client(store)
    register(client, "a1")
    task = serve_one(client, "a1")
    response = client.post(
        "/judgments",
        json={"task_id": task["task_id"], "annotator_id": "a1", "ratings": [4, 6, 3]},
    )
    assert response.status_code == 422


def test_exact_duplicate_is_idempotent(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=2))
    client = make_client(store)
    register(client, "a1")
    task = serve_one(client, "a1")
    payload = {"task_id": task["task_id"], "annotator_id": "a1", "winner": "A"}
    first = client.post("/judgments", json=payload).json()
    second = client.post("/judgments", json=payload).json()
    assert second["duplicate"] is True
    assert second["sequence"] == first["sequence"]
    assert len(store.judgments) == 1


def test_conflicting_resubmission_rejected(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=2))
    client = make_client(store)
    register(client, "a1")
    task = serve_one(client, "a1")
    payload = {"task_id": task["task_id"], "annotator_id": "a1", "winner": "A"}
    client.post("/judgments", json=payload)
    conflict = client.post("/judgments", json=dict(payload, winner="B"))
    assert conflict.status_code == 409


def test_unknown_task_404_and_unserved_403(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=2))
    client = make_client(store)
    register(client, "a1")
    missing = client.post(
        "/judgments", json={"task_id": "nope", "annotator_id": "a1", "winner": "A"}
    )
    assert missing.status_code == 404
    unserved = client.post(
        "/judgments",
        json={"task_id": "main-specificity-0", "annotator_id": "a1", "winner": "A"},
    )
    assert unserved.status_code == 403


def test_get_task_by_id(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=1))
    client = make_client(store)
    response = client.get("/tasks/main-specificity-0")
    assert response.status_code == 200
    assert "machine_winner" not in response.json()
    assert client.get("/tasks/absent").status_code == 404


# ---------------------------------------------------------------------------
# permutation handling


def test_ab_permutation_recorded_and_derandomized(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=20), seed=3)
    swapped = [t for t in store.tasks.values() if t.swapped]
    unswapped = [t for t in store.tasks.values() if not t.swapped]
    assert swapped and unswapped  # seed 3 produces both
    for task in store.tasks.values():
        view = task.served_view()
        if task.swapped:
            assert view["a"] == task.items[1]
            assert task.original_index("A") == 1
            assert task.original_index("B") == 0
        else:
            assert view["a"] == task.items[0]
            assert task.original_index("A") == 0


def test_derandomized_winners_are_position_independent(tmp_path):
    # annotators unanimously prefer a fixed underlying item per task (varying
    # across tasks), regardless of which side it is shown on
    definitions = [
        dict(d, machine_winner=i % 2)
        for i, d in enumerate(main_definitions(count=12))
    ]
    store = fresh_store(tmp_path, definitions, seed=3)
    client = make_client(store)
    preferred = {d["task_id"]: d["machine_winner"] for d in definitions}
    for annotator in ("a1", "a2", "a3"):
        register(client, annotator)
        while True:
            response = client.get("/tasks/next", params={"annotator": annotator})
            if response.status_code == 204:
                break
            task_view = response.json()
            task = store.tasks[task_view["task_id"]]
            target = preferred[task.task_id]
            winner = "A" if task.original_index("A") == target else "B"
            client.post(
                "/judgments",
                json={
                    "task_id": task.task_id,
                    "annotator_id": annotator,
                    "winner": winner,
                },
            )
    report = client.get("/reports/agreement", params={"dimension": "specificity"}).json()
    assert report["fleiss_kappa"] == 1.0
    assert report["alignment"]["accuracy"] == 1.0
    assert report["alignment"]["f1"] == 1.0


def test_single_category_unanimity_reports_undefined(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=4), seed=3)
    client = make_client(store)
    for annotator in ("a1", "a2", "a3"):
        register(client, annotator)
        while True:
            response = client.get("/tasks/next", params={"annotator": annotator})
            if response.status_code == 204:
                break
            task_view = response.json()
            task = store.tasks[task_view["task_id"]]
            winner = "A" if task.original_index("A") == 0 else "B"
            client.post(
                "/judgments",
                json={
                    "task_id": task.task_id,
                    "annotator_id": annotator,
                    "winner": winner,
                },
            )
    response = client.get("/reports/agreement", params={"dimension": "specificity"})
    assert response.status_code == 409
    assert "undefined" in response.json()["detail"]


# ---------------------------------------------------------------------------
# agreement reports


def test_unanimous_annotators_fleiss_one_and_oracle_match(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=30))
    client = make_client(store)
    for annotator in ("a1", "a2", "a3"):
        register(client, annotator)
        drain(client, annotator, answer="A")
    report = client.get("/reports/agreement", params={"dimension": "specificity"}).json()
    assert report["fleiss_kappa"] == 1.0
    assert report["tasks"] == 30

    # the de-randomized counts must match the metrics-module oracle directly
    counts = []
    for task_id in sorted(store.tasks):
        task = store.tasks[task_id]
        votes = [0, 0]
        for annotator in ("a1", "a2", "a3"):
            winner = store.judgments[(task_id, annotator)].winner
            votes[task.original_index(winner)] += 1
        counts.append(votes)
    assert report["fleiss_kappa"] == fleiss_kappa(counts, 3)


def test_incomplete_subset_lists_missing_pairs(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=2))
    client = make_client(store)
    register(client, "a1")
    register(client, "a2")
    register(client, "a3")
    drain(client, "a1")
    response = client.get("/reports/agreement", params={"dimension": "specificity"})
    assert response.status_code == 409
    missing = response.json()["missing"]
    assert ["main-specificity-0", "a2"] in missing
    assert len(missing) == 4  # 2 tasks x 2 annotators


def test_even_annotator_count_rejected(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=1))
    client = make_client(store)
    register(client, "a1")
    register(client, "a2")
    drain(client, "a1")
    drain(client, "a2")
    response = client.get("/reports/agreement", params={"dimension": "specificity"})
    assert response.status_code == 409
    assert "odd" in response.json()["detail"]


def test_likert_report_uses_icc(tmp_path):
    store = fresh_store(tmp_path, likert_definitions(count=6))
    client = make_client(store)
    ratings = {
        "a1": [1, 2, 3],
        "a2": [2, 3, 4],
        "a3": [1, 3, 3],
    }

    for annotator, (d1, d2, d3) in ratings.items():
        register(client, annotator)
        index = 0
        while True:
            response = client.get("/tasks/next", params={"annotator": annotator})
            if response.status_code == 204:
                break
            task = response.json()
            client.post(
                "/judgments",
                json={
                    "task_id": task["task_id"],
                    "annotator_id": annotator,
                    "ratings": [min(5, d1 + index % 2), d2, d3],
                },
            )
            index += 1
    report = client.get("/reports/agreement", params={"kind": "likert"}).json()
    assert set(report["icc"]) == {"d1", "d2", "d3"}
    for value in report["icc"].values():
        assert -1.0 <= value <= 1.0


# ---------------------------------------------------------------------------
# durability


def test_replay_reconstructs_identical_state(tmp_path):
    store = fresh_store(tmp_path, practice_definitions() + main_definitions(count=5))
    client = make_client(store)
    register(client, "a1")
    drain(client, "a1", answer="B")

    reloaded = AnnotationStore(tmp_path / "log.jsonl", seed=5)
    assert reloaded.annotators == store.annotators
    assert set(reloaded.tasks) == set(store.tasks)
    assert reloaded.judgments == store.judgments
    assert reloaded.served == store.served
    # sequence counter continues from the replayed log
    next_task = reloaded.next_task("a1")
    assert next_task is None


def test_serves_ui_bundle_when_built(tmp_path):
    import pathlib

    dist = pathlib.Path(__file__).parent.parent / "frontend" / "dist"
    if not (dist / "index.html").is_file():
        pytest.skip("frontend bundle not built (run npm run build in frontend/)")
    store = fresh_store(tmp_path, main_definitions(count=1))
    client = make_client(store, static_dir=dist)
    page = client.get("/app/")
    assert page.status_code == 200
    assert "Essay Feedback Annotation" in page.text
    script = client.get("/app/main.js")
    assert script.status_code == 200


def test_shared_token_auth(tmp_path):
    store = fresh_store(tmp_path, main_definitions(count=1))
    client = make_client(store, token="shared-secret")
    refused = client.post("/annotators", json={"annotator_id": "a1"})
    assert refused.status_code == 401
    accepted = client.post(
        "/annotators",
        json={"annotator_id": "a1"},
        headers={"X-Auth-Token": "shared-secret"},
    )
    assert accepted.status_code == 201

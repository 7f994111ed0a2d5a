"""End-to-end demo: scrape the bundled corpus, then drive the HTTP API.

Search for the Llama 3 paper, promote it, pull in its references, keep
the five most cited, and generate a related-work report grouped by
challenge. Runs fully offline; exits 0 only if every step succeeds.
"""

import argparse
import json
import os
import socket
import sys
import tempfile
import threading
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

os.environ.setdefault("GRAPHY_OFFLINE", "1")

INSTRUCTION = "Please write me a related work, focusing on their challenge"
SEED_TITLE = "The Llama 3 Herd of Models"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def start_server(app, port: int):
    import uvicorn

    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    return server, thread


def wait_for_health(client, deadline: float = 10.0) -> None:
    start = time.monotonic()
    while time.monotonic() - start < deadline:
        try:
            if client.get("/health").status_code == 200:
                return
        except Exception:
            pass
        time.sleep(0.05)
    raise RuntimeError("server did not come up in time")


def check(condition, message: str) -> None:
    if not condition:
        raise AssertionError(message)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work-dir", default=None, help="where to put graph data and the report")
    args = parser.parse_args()

    work = Path(args.work_dir) if args.work_dir else Path(tempfile.mkdtemp(prefix="graphy-demo-"))
    work.mkdir(parents=True, exist_ok=True)

    config_path = work / "config.json"
    config_path.write_text(json.dumps({
        "data_dir": str(work / "data"),
        "workflow": str(ROOT / "src" / "graphy" / "data" / "demo_workflow.json"),
        "repository": {"manifest": str(ROOT / "tests" / "fixtures" / "corpus" / "manifest.json")},
    }))

    from graphy.cli import main as cli_main

    print(f"[1/6] scraping the corpus into {work / 'data'}")
    code = cli_main(["scrape", "--config", str(config_path), "--titles", SEED_TITLE, "--depth", "1"])
    check(code == 0, f"scrape exited {code}")

    from graphy.config import load_config
    from graphy.server import app_from_config

    import httpx

    port = free_port()
    server, thread = start_server(app_from_config(load_config(config_path)), port)
    try:
        with httpx.Client(base_url=f"http://127.0.0.1:{port}/api/v1", timeout=10.0) as client:
            wait_for_health(client)
            print(f"[2/6] server up on port {port}")

            sid = client.post("/sessions").json()["session_id"]
            base = f"/sessions/{sid}"

            found = client.post(f"{base}/search", json={"query": "Llama3"}).json()
            check(len(found["results"]) == 1, "expected exactly one Llama3 hit")
            seed_ids = [r["id"] for r in found["results"]]
            client.post(f"{base}/promote", json={"chosen": seed_ids}).raise_for_status()
            print(f"[3/6] promoted {found['results'][0]['title']!r}")

            pre = client.post(f"{base}/prequery", json={}).json()
            check(len(pre["population"]) == 9, f"expected 9 references, got {len(pre['population'])}")

            hist = client.post(f"{base}/histogram", json={"attribute": "year"}).json()
            check(hist["histogram"]["population_size"] == 9, "histogram should cover the population")

            refined = client.post(f"{base}/refine", json={
                "mode": "top_k",
                "params": {"attribute": "citation_count", "k": 5, "direction": "desc"},
            }).json()
            check(len(refined["future"]) == 5, "refine should keep five papers")
            client.post(f"{base}/promote", json={"chosen": refined["future"]}).raise_for_status()
            selected = refined["future"]
            print(f"[4/6] kept the 5 most cited references")

            intent = client.post(f"{base}/report/intent", json={"instruction": INSTRUCTION}).json()
            check(intent["intent"]["required_dimensions"] == ["Challenge"], "intent should target Challenge")
            client.post(f"{base}/report/intent/confirm", json={}).raise_for_status()

            mindmap = client.post(f"{base}/report/mindmap", json={}).json()
            categories = mindmap["mindmap"]["categories"]
            check(len(categories) >= 3, "expected at least three challenge groups")
            client.post(f"{base}/report/mindmap/confirm", json={}).raise_for_status()
            print(f"[5/6] mind map with {len(categories)} categories confirmed")

            client.post(f"{base}/report/draft", json={}).raise_for_status()
            tex = client.get(f"{base}/report/download", params={"format": "latex"})
            tex.raise_for_status()
            check(tex.text.strip(), "TeX download is empty")
            for fact_id in selected:
                check(f"\\bibitem{{{fact_id}}}" in tex.text, f"missing bibitem for {fact_id}")
            check(tex.text.count("\\bibitem") == len(selected), "one bibitem per selected paper")

            out_path = work / "report.tex"
            out_path.write_text(tex.text)
            print(f"[6/6] report written to {out_path}")
    finally:
        server.should_exit = True
        thread.join(timeout=5)

    print("demo complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())

from __future__ import annotations

import threading
import time

import uvicorn

SAMPLE_CONTEXT = (
    "A security van was robbed outside a bank in Norwich city centre. "
    "Police said three armed men took a large sum from the vehicle on Monday evening. "
    "No one was injured although two guards were left badly shaken. "
    "The area around the bank has been cordoned off while officers investigate."
)


class LiveServer:
    """uvicorn on an ephemeral port, running in a daemon thread."""

    def __init__(self, app):
        config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self) -> str:
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc_info):
        self.server.should_exit = True
        self.thread.join(timeout=10)

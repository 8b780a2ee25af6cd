"""Launch the annotation service for frontend integration tests.

Usage: python3 serve_annotation.py <port> <store_dir>
Admin token is fixed to "admin-secret"; screening key is B A D C.
"""

import sys

import uvicorn

from askalign.annotation.service import create_app
from askalign.annotation.store import AnnotationStore


def main() -> None:
    port = int(sys.argv[1])
    store_dir = sys.argv[2]
    store = AnnotationStore(store_dir, screening_key=["B", "A", "D", "C"])
    app = create_app(store, admin_token="admin-secret")
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()

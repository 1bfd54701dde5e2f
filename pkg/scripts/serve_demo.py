#!/usr/bin/env python3
"""Stand up a demo server: registers the fixture exams in a data directory,
issues secure links, prints the instructor token, and serves the API.

Usage: python scripts/serve_demo.py [--port 8000] [--data-dir demo-data]
                                    [--static-dir ../frontend]
"""

from __future__ import annotations

import argparse
import secrets

import uvicorn

from mindexam.api import create_app
from mindexam.errors import ExamExists
from mindexam.fixtures import valid_exam_configs
from mindexam.service import ExamService


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--data-dir", default="demo-data")
    parser.add_argument("--static-dir")
    args = parser.parse_args()

    service = ExamService(data_dir=args.data_dir)
    instructor_token = secrets.token_urlsafe(16)
    service.add_instructor("instructor-1", instructor_token)

    base = f"http://{args.host}:{args.port}"
    for name, doc in valid_exam_configs().items():
        if name == "zero_trust":
            # the scripted provider only exists inside the fixtures; serve
            # the same exam against the deterministic mock instead
            for tool in doc["tools"]:
                tool["provider_ref"] = "mock"
        try:
            service.create_exam(doc)
        except ExamExists:
            pass
        print(f"exam {doc['exam_id']}:")
        for row in service.issue_links(doc["exam_id"], base_url=base):
            print(f"  {row['student_id']}: {row['url']}")

    print(f"\ninstructor token: {instructor_token}")
    uvicorn.run(create_app(service, static_dir=args.static_dir),
                host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()

"""Administrative command line.

Commands exit 0 on success; on failure they print one machine-parsable line
``error: <code>: <message>`` to stderr and exit 2 (validation), 3 (storage),
or 4 (network).
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import (
    ExamConfigError,
    ExamExists,
    InvariantViolation,
    LevelOutOfRange,
    MindExamError,
    ProviderError,
    ProviderTimeout,
    SchemaViolation,
    StorageFailure,
    UnknownExam,
    UnknownSession,
)
from .service import ExamService, providers_from_config

EXIT_VALIDATION = 2
EXIT_STORAGE = 3
EXIT_NETWORK = 4

_VALIDATION_ERRORS = (ExamConfigError, ExamExists, SchemaViolation,
                      InvariantViolation, LevelOutOfRange, UnknownExam,
                      UnknownSession)
_NETWORK_ERRORS = (ProviderTimeout, ProviderError)


def _fail(code: str, message: str, exit_code: int) -> int:
    print(f"error: {code}: {message}", file=sys.stderr)
    return exit_code


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _write_out(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    config = _load_config(args.config) if args.config else {}
    service = ExamService(data_dir=args.data_dir,
                          providers=providers_from_config(config))
    for entry in config.get("instructors", []):
        service.add_instructor(entry["id"], entry["token"])
    app = create_app(service, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_create_exam(args) -> int:
    service = ExamService(data_dir=args.data_dir)
    exam = service.create_exam(_load_config(args.config_file))
    print(exam.exam_id)
    return 0


def cmd_export_trace(args) -> int:
    service = ExamService(data_dir=args.data_dir)
    _write_out(service.export_trace(args.session_id), args.out)
    return 0


def cmd_score_report(args) -> int:
    service = ExamService(data_dir=args.data_dir)
    _write_out(service.score_report(args.exam_id), args.out)
    return 0


def cmd_issue_links(args) -> int:
    service = ExamService(data_dir=args.data_dir)
    for row in service.issue_links(args.exam_id, base_url=args.base_url):
        print(f"{row['student_id']}\t{row['url']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mindexam")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", default="data",
                        help="directory holding exams, traces, and grants")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", parents=[common], help="run the HTTP API")
    serve.add_argument("--config", help="server config (instructor tokens, providers)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--static-dir", help="serve a built webapp from this directory")
    serve.set_defaults(func=cmd_serve)

    create = sub.add_parser("create-exam", parents=[common],
                            help="validate and register an exam config")
    create.add_argument("config_file")
    create.set_defaults(func=cmd_create_exam)

    export = sub.add_parser("export-trace", parents=[common],
                            help="export one session's trace document")
    export.add_argument("session_id")
    export.add_argument("--out")
    export.set_defaults(func=cmd_export_trace)

    report = sub.add_parser("score-report", parents=[common],
                            help="tab-separated indicators and scores")
    report.add_argument("exam_id")
    report.add_argument("--out")
    report.set_defaults(func=cmd_score_report)

    links = sub.add_parser("issue-links", parents=[common],
                           help="print per-student secure URLs")
    links.add_argument("exam_id")
    links.add_argument("--base-url", default="http://localhost:8000")
    links.set_defaults(func=cmd_issue_links)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExamConfigError as exc:
        first = exc.violations[0]
        return _fail(first.code, f"{first.path}: {first.message}"
                     + (f" (+{len(exc.violations) - 1} more)"
                        if len(exc.violations) > 1 else ""), EXIT_VALIDATION)
    except _VALIDATION_ERRORS as exc:
        return _fail(exc.code, exc.message, EXIT_VALIDATION)
    except StorageFailure as exc:
        return _fail(exc.code, exc.message, EXIT_STORAGE)
    except _NETWORK_ERRORS as exc:
        return _fail(exc.code, exc.message, EXIT_NETWORK)
    except MindExamError as exc:
        return _fail(exc.code, exc.message, EXIT_VALIDATION)
    except FileNotFoundError as exc:
        return _fail("file_not_found", str(exc), EXIT_VALIDATION)
    except json.JSONDecodeError as exc:
        return _fail("invalid_json", str(exc), EXIT_VALIDATION)
    except OSError as exc:
        return _fail("io_error", str(exc), EXIT_STORAGE)


if __name__ == "__main__":
    sys.exit(main())

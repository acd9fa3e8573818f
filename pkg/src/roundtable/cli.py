"""Command line entry point: evaluate, build-corpus, bench, replay.

Settings resolve as flags > environment (``ROUNDTABLE_*``) > ``--config``
JSON file > built-in defaults. The live backend reads its API key from the
environment variable named by ``key_env`` (default ``ROUNDTABLE_API_KEY``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .bench import run_ablation, run_benchmark
from .corpus import MalformedLine, build_benchmark, load_corpus
from .discussion import DiscussionAborted, EvaluationTask, InvalidState, UnparseableDecomposition
from .gateway import (AgentHandle, AuthMissing, CallBudget, GatewayError, GenerationParams,
                      HttpBackend, RecordingBackend, ReplayBackend, ScriptedBackend,
                      TranscriptStore)
from .gateway.backends import DEFAULT_KEY_ENV
from .model import ERROR_TYPES, AnnotatedStory, ErrorType, StoryText, Strategy
from .pipeline import AgentSet, evaluate_story
from .scripted import gold_agents

log = logging.getLogger("roundtable")

DEFAULTS = {
    "backend": "scripted",
    "base_url": "https://api.openai.com/v1",
    "model": "gpt-4",
    "temperature": 0.0,
    "max_tokens": 1024,
    "timeout": 60.0,
    "key_env": DEFAULT_KEY_ENV,
    "max_attempts": 5,
    "rate": None,
    "agents": 2,
    "max_rounds": 2,
    "parallel": 1,
    "max_calls": None,
}

ENV_PREFIX = "ROUNDTABLE_"

_TYPES = {"temperature": float, "max_tokens": int, "timeout": float, "max_attempts": int,
          "rate": float, "agents": int, "max_rounds": int, "parallel": int, "max_calls": int}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def resolve_settings(args) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from None
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        settings.update(data)
    for key in DEFAULTS:
        env = os.environ.get(ENV_PREFIX + key.upper())
        if env is not None and key != "key_env":
            settings[key] = env
    if os.environ.get(ENV_PREFIX + "KEY_ENV"):
        settings["key_env"] = os.environ[ENV_PREFIX + "KEY_ENV"]
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    for key, typ in _TYPES.items():
        if settings[key] is not None:
            try:
                settings[key] = typ(settings[key])
            except (TypeError, ValueError):
                raise UsageError(f"setting {key}={settings[key]!r} is not a valid {typ.__name__}")
    return settings


def _params(settings) -> GenerationParams:
    try:
        return GenerationParams(settings["model"], settings["temperature"],
                                settings["max_tokens"], settings["timeout"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _strategy(name: str, settings, args) -> Strategy:
    try:
        st = Strategy(name, num_agents=settings["agents"], max_rounds=settings["max_rounds"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if getattr(args, "no_feedback", False):
        st = replace(st, feedback_enabled=False)
    if getattr(args, "no_qa_explanations", False):
        st = replace(st, qa_explanations_enabled=False)
    return st


def _rubric(args) -> tuple[ErrorType, ...]:
    if not getattr(args, "rubric", None):
        return ERROR_TYPES
    try:
        return tuple(ErrorType.parse(t) for t in args.rubric.split(",") if t.strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from None


class AgentFactory:
    """Builds the agent set for one (strategy, story) pair from the resolved settings."""

    def __init__(self, settings, args, out: Path):
        self.settings = settings
        self.kind = settings["backend"]
        self.params = _params(settings)
        self.script = getattr(args, "script", None)
        self.shared = None
        if self.kind == "scripted":
            if not self.script:
                raise UsageError("--backend scripted needs --script")
            if not Path(self.script).exists():
                raise UsageError(f"script file not found: {self.script}")
        elif self.kind == "http":
            try:
                live = HttpBackend(settings["base_url"], key_env=settings["key_env"],
                                   max_attempts=settings["max_attempts"], rate=settings["rate"])
            except AuthMissing as exc:
                raise UsageError(str(exc)) from None
            self.shared = RecordingBackend(live, TranscriptStore(out / "transcript.jsonl"))
        elif self.kind == "replay":
            source = getattr(args, "transcript", None)
            if not source or not Path(source).exists():
                raise UsageError("--backend replay needs an existing --transcript file")
            self.shared = ReplayBackend(source)
        elif self.kind != "gold":
            raise UsageError(f"unknown backend {self.kind!r}")
        if self.shared is not None and settings["max_calls"]:
            self.shared = CallBudget(self.shared, settings["max_calls"])
        self._budget = settings["max_calls"]

    def __call__(self, strategy: Strategy, story: AnnotatedStory,
                 rubric=ERROR_TYPES) -> AgentSet:
        if self.kind == "gold":
            return gold_agents(strategy, story, rubric)
        if self.kind == "scripted":
            backend = ScriptedBackend.from_jsonl(self.script, story.story.id, strategy.label)
        else:
            backend = self.shared
        p = self.params
        return AgentSet([AgentHandle(f"evaluator-{i + 1}", backend, p)
                         for i in range(strategy.num_agents)],
                        AgentHandle("feedback", backend, p), AgentHandle("summarizer", backend, p),
                        AgentHandle("decomposer", backend, p))


def _read_inputs(args) -> list[AnnotatedStory]:
    if bool(args.story) == bool(args.corpus):
        raise UsageError("give exactly one of --story or --corpus")
    try:
        if args.story:
            path = Path(args.story)
            body = path.read_text(encoding="utf-8")
            return [AnnotatedStory(StoryText(args.story_id or path.stem, body, args.language))]
        return load_corpus(args.corpus)
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}") from None
    except (MalformedLine, ValueError) as exc:
        raise UsageError(f"bad input: {exc}") from None


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_evaluate(args) -> int:
    settings = resolve_settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stories = _read_inputs(args)
    strategy = _strategy(args.strategy, settings, args)
    rubric = _rubric(args)
    factory = AgentFactory(settings, args, out)

    def one(story: AnnotatedStory) -> tuple[bool, str]:
        task = EvaluationTask(story.story, rubric, strategy)
        sid = story.story.id
        try:
            report, transcript = evaluate_story(task, factory(strategy, story, rubric),
                                                checkpoint_dir=out / "checkpoints",
                                                params_snapshot=factory.params.to_dict())
        except DiscussionAborted as exc:
            return False, f"{sid}: aborted ({exc.cause}); checkpoint: {exc.path}"
        except (GatewayError, UnparseableDecomposition, InvalidState) as exc:
            return False, f"{sid}: failed: {exc}"
        _write_json(out / "reports" / f"{sid}.json", report.to_dict())
        (out / "reports" / f"{sid}.md").write_text(report.prose, encoding="utf-8")
        (out / "discussions").mkdir(parents=True, exist_ok=True)
        (out / "discussions" / f"{sid}.json").write_text(transcript.to_json() + "\n",
                                                         encoding="utf-8")
        if report.unparsed:
            return False, f"{sid}: summary could not be parsed; report flagged unparsed"
        return True, f"{sid}: total score {report.scorecard.total}"

    workers = settings["parallel"] or 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, stories))
    else:
        results = [one(s) for s in stories]
    failures = 0
    for ok, message in results:
        print(message, file=sys.stdout if ok else sys.stderr)
        failures += not ok
    return 2 if failures else 0


def parse_plan(text: str) -> dict:
    plan = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, count = part.partition("=")
        try:
            plan[ErrorType.parse(name).value] = int(count) if count else 1
        except ValueError as exc:
            raise UsageError(f"bad plan entry {part!r}: {exc}") from None
    if not plan:
        raise UsageError(f"empty plan {text!r}")
    return plan


def cmd_build_corpus(args) -> int:
    try:
        corpus = load_corpus(args.input)
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}") from None
    except MalformedLine as exc:
        raise UsageError(f"bad input: {exc}") from None
    dist = [parse_plan(p) for p in (args.plan or ["rep=1"])]
    limit = args.word_limit if args.word_limit and args.word_limit > 0 else None
    result = build_benchmark(corpus, dist, args.seed, args.out, limit, args.parallel or 1,
                             args.name)
    print(f"wrote {len(result.stories)} stories to {result.corpus_path}")
    print(f"manifest: {result.manifest_path}")
    for s in result.skipped:
        print(f"skipped {s['id']}: {s['reason']}", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    settings = resolve_settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        corpus = load_corpus(args.corpus)
    except OSError as exc:
        raise UsageError(f"cannot read corpus: {exc}") from None
    except MalformedLine as exc:
        raise UsageError(f"bad corpus: {exc}") from None
    rubric = _rubric(args)
    factory = AgentFactory(settings, args, out)
    agents_for = lambda st, s: factory(st, s, rubric)  # noqa: E731
    common = dict(reference=args.reference, workers=settings["parallel"], out_dir=out,
                  rubric=rubric, checkpoint_dir=out / "checkpoints")
    try:
        if args.ablation:
            base = _strategy(args.strategy, settings, args)
            table = run_ablation(corpus, base, agents_for, **common)
        else:
            names = [n.strip() for n in args.strategies.split(",") if n.strip()]
            table = run_benchmark(corpus, [_strategy(n, settings, args) for n in names],
                                  agents_for, **common)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(table.to_csv())
    excluded = sum(r.excluded for r in table.rows)
    for r in table.rows:
        for rec in r.scores:
            if rec.get("checkpoint"):
                print(f"{rec['story_id']} ({r.label}) checkpoint: {rec['checkpoint']}",
                      file=sys.stderr)
    if excluded:
        print(f"{excluded} evaluations excluded; see {out}", file=sys.stderr)
    return 2 if excluded else 0


def cmd_replay(args) -> int:
    args.backend = "replay"
    return cmd_evaluate(args)


def _add_common(p, backend_choices=("scripted", "http", "replay")):
    p.add_argument("--out", required=True, help="directory for every output file")
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--backend", choices=backend_choices, default=None,
                   help="agent backend (default: scripted)")
    p.add_argument("--script", help="JSON Lines script for the scripted backend")
    p.add_argument("--transcript", help="transcript file to replay from")
    p.add_argument("--base-url", dest="base_url", help="chat-completions base URL")
    p.add_argument("--model", help="model name sent to the live backend")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--timeout", type=float, help="request timeout in seconds")
    p.add_argument("--key-env", dest="key_env",
                   help=f"environment variable holding the API key (default {DEFAULT_KEY_ENV})")
    p.add_argument("--max-attempts", dest="max_attempts", type=int,
                   help="attempts per call before giving up")
    p.add_argument("--rate", type=float, help="max requests per second to the live backend")
    p.add_argument("--agents", type=int, help="number of evaluator agents (default 2)")
    p.add_argument("--max-rounds", dest="max_rounds", type=int,
                   help="rounds for o_b_o and sr strategies (default 2)")
    p.add_argument("--no-feedback", action="store_true", help="disable the moderator")
    p.add_argument("--no-qa-explanations", action="store_true",
                   help="ask the summarizer for scores only")
    p.add_argument("--rubric", help="comma-separated error types (default all five)")
    p.add_argument("--parallel", type=int, help="concurrent discussions (default 1)")
    p.add_argument("--max-calls", dest="max_calls", type=int,
                   help="abort with checkpoints after this many backend calls")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="roundtable", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    ev = sub.add_parser("evaluate", help="evaluate one story or a corpus")
    ev.add_argument("--story", help="plain-text story file")
    ev.add_argument("--story-id", dest="story_id", help="id for --story (default: file stem)")
    ev.add_argument("--language", default="en", help="language tag for --story")
    ev.add_argument("--corpus", help="JSON Lines corpus")
    ev.add_argument("--strategy", default="sr_cot", help="sa, o_b_o, sr, cot or sr_cot")
    _add_common(ev)
    ev.set_defaults(func=cmd_evaluate)

    bc = sub.add_parser("build-corpus", help="inject errors and write an annotated corpus")
    bc.add_argument("--in", dest="input", required=True, help="JSON Lines source corpus")
    bc.add_argument("--out", required=True, help="output directory")
    bc.add_argument("--seed", type=int, default=0)
    bc.add_argument("--plan", action="append",
                    help="error plan such as rep=1,fer=2; repeat to sample between plans")
    bc.add_argument("--word-limit", dest="word_limit", type=int, default=200,
                    help="truncate stories to whole sentences within this many words (0: off)")
    bc.add_argument("--name", default="annotated", help="output file stem")
    bc.add_argument("--parallel", type=int, default=1)
    bc.set_defaults(func=cmd_build_corpus)

    be = sub.add_parser("bench", help="correlate engine scores with gold or human scores")
    be.add_argument("--corpus", required=True, help="annotated JSON Lines corpus")
    be.add_argument("--strategies", default="sa,o_b_o,sr,cot,sr_cot",
                    help="comma-separated strategies")
    be.add_argument("--ablation", action="store_true",
                    help="run the four ablation rows around --strategy instead")
    be.add_argument("--strategy", default="sr_cot", help="base strategy for --ablation")
    be.add_argument("--reference", default="auto", choices=("auto", "human", "gold"))
    _add_common(be, ("scripted", "http", "replay", "gold"))
    be.set_defaults(func=cmd_bench)

    rp = sub.add_parser("replay", help="re-run an evaluation from a recorded transcript")
    rp.add_argument("--transcript", required=True, help="recorded transcript (JSON Lines)")
    rp.add_argument("--story", help="plain-text story file")
    rp.add_argument("--story-id", dest="story_id")
    rp.add_argument("--language", default="en")
    rp.add_argument("--corpus", help="JSON Lines corpus")
    rp.add_argument("--strategy", default="sr_cot")
    rp.add_argument("--out", required=True)
    rp.add_argument("--config")
    for flag, dest, typ in (("--agents", "agents", int), ("--max-rounds", "max_rounds", int),
                            ("--model", "model", str), ("--temperature", "temperature", float),
                            ("--max-tokens", "max_tokens", int)):
        rp.add_argument(flag, dest=dest, type=typ)
    rp.add_argument("--no-feedback", action="store_true")
    rp.add_argument("--no-qa-explanations", action="store_true")
    rp.add_argument("--rubric")
    rp.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

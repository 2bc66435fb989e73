"""LLM validation: prompt rendering, providers, verdict extraction and voting."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import logging
import os
import re
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Protocol, Sequence

from vccscan.embed import post_json_with_retry
from vccscan.errors import FixtureMiss, ProviderUnavailable

logger = logging.getLogger(__name__)

RESPONSE_START = "=== JSON RESPONSE ==="
RESPONSE_END = "=== END JSON ==="
DEFAULT_PROMPT_BUDGET = 24_000
PROMPT_TOO_LARGE = "PROMPT_TOO_LARGE"

PROMPT_TEMPLATE = """
Analyze the following code functions to determine if the cloned function contains the same vulnerability as the original function:

ORIGINAL FUNCTION (Known vulnerable):
{original_function}

FIXED FUNCTION (Patched version):
{fixed_function}

CLONED FUNCTION (To be assessed):
{cloned_function}

Please assess whether the cloned function is vulnerable to the same issue that was fixed in the original function.
NOTE: A function that merely CALLS the original vulnerable function should NOT be considered a vulnerable clone unless it also IMPLEMENTS similar vulnerable logic itself. Focus on whether the cloned function contains similar vulnerable code patterns, not just whether it uses the vulnerable function.
IMPORTANT: Respond ONLY with valid JSON in the exact format below. Do not include any explanatory text before or after the JSON.

=== JSON RESPONSE ===
{{
  "is_vulnerable": true/false,
  "confidence_level": 1-5,
  "justification": "Detailed explanation of why the clone is or is not vulnerable. For vulnerable cases, explain what specific vulnerability pattern is present. For non-vulnerable cases, explain what protections/fixes are already in place that prevent the vulnerability."
}}
=== END JSON ===
"""


class ParseStatus(str, enum.Enum):
    CLEAN = "CLEAN"
    REPAIRED = "REPAIRED"
    FALLBACK = "FALLBACK"
    FAILED = "FAILED"


@dataclasses.dataclass(frozen=True)
class ValidationRequest:
    original_function: str
    fixed_function: str
    cloned_function: str
    entry_id: str = ""
    target_id: str = ""

    def __post_init__(self):
        for name in ("original_function", "fixed_function", "cloned_function"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} must be non-empty")

    @property
    def size(self) -> int:
        return len(self.original_function) + len(self.fixed_function) + len(self.cloned_function)


@dataclasses.dataclass(frozen=True)
class ValidationVerdict:
    is_vulnerable: bool
    confidence_level: int
    justification: str
    parse_status: ParseStatus
    raw_response: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parse_status", ParseStatus(self.parse_status))
        if self.parse_status is ParseStatus.FAILED:
            # Downstream consumers treat an unparsed answer as "not vulnerable".
            object.__setattr__(self, "is_vulnerable", False)
        elif not 1 <= self.confidence_level <= 5:
            raise ValueError(f"confidence_level must lie in 1..5, got {self.confidence_level}")

    @classmethod
    def failed(cls, raw_response: str = "", justification: str = "") -> "ValidationVerdict":
        return cls(False, 0, justification, ParseStatus.FAILED, raw_response)

    def to_json(self) -> dict:
        return {
            "is_vulnerable": self.is_vulnerable,
            "confidence_level": self.confidence_level,
            "justification": self.justification,
            "parse_status": self.parse_status.value,
            "raw_response": self.raw_response,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ValidationVerdict":
        return cls(bool(obj["is_vulnerable"]), int(obj["confidence_level"]), obj.get("justification", ""),
                   ParseStatus(obj["parse_status"]), obj.get("raw_response", ""))


def render_prompt(req: ValidationRequest) -> str:
    return PROMPT_TEMPLATE.format(
        original_function=req.original_function,
        fixed_function=req.fixed_function,
        cloned_function=req.cloned_function,
    )


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# --- response parsing -----------------------------------------------------

def _balanced_object(text: str) -> str | None:
    """First ``{...}`` block whose braces balance, ignoring braces in strings."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start:i + 1]
        start = text.find("{", start + 1)
    return None


def json_candidate(response_text: str) -> str | None:
    lo = response_text.find(RESPONSE_START)
    if lo != -1:
        hi = response_text.find(RESPONSE_END, lo + len(RESPONSE_START))
        if hi != -1:
            return response_text[lo + len(RESPONSE_START):hi].strip()
    return _balanced_object(response_text)


_ESCAPE = re.compile(r"\\(.?)", re.DOTALL)
_VALID_ESCAPES = frozenset('"\\/bfnrtu')


def repair_escapes(text: str) -> str:
    """Double every backslash that does not start a valid JSON escape."""
    return _ESCAPE.sub(lambda m: m.group(0) if m.group(1) and m.group(1) in _VALID_ESCAPES else "\\\\" + m.group(1),
                       text)


def _coerce(obj) -> tuple[bool, int, str] | None:
    if not isinstance(obj, dict):
        return None
    vul = obj.get("is_vulnerable")
    conf = obj.get("confidence_level")
    if isinstance(vul, str) and vul.lower() in ("true", "false"):
        vul = vul.lower() == "true"
    if not isinstance(vul, bool):
        return None
    if isinstance(conf, str) and conf.strip().isdigit():
        conf = int(conf.strip())
    if isinstance(conf, float) and conf.is_integer():
        conf = int(conf)
    if isinstance(conf, bool) or not isinstance(conf, int) or not 1 <= conf <= 5:
        return None
    justification = obj.get("justification", "")
    return vul, conf, justification if isinstance(justification, str) else json.dumps(justification)


_FIELD_VUL = re.compile(r'"?is_vulnerable"?\s*:\s*"?(true|false)\b', re.IGNORECASE)
_FIELD_CONF = re.compile(r'"?confidence_level"?\s*:\s*"?(\d+)')
_FIELD_JUST = re.compile(r'"justification"\s*:\s*"(.*?)"\s*(?:,\s*"|\}|$)', re.DOTALL)


def extract_verdict(response_text: str) -> ValidationVerdict:
    """Parse a model answer; never raises.

    Tries, in order: strict JSON of the marked (or first balanced) object,
    JSON after escape repair, regex extraction of the two required fields.
    """
    text = response_text if isinstance(response_text, str) else str(response_text)
    candidate = json_candidate(text)
    if candidate is not None:
        try:
            fields = _coerce(json.loads(candidate))
        except ValueError:
            fields = None
        if fields is not None:
            return ValidationVerdict(*fields, ParseStatus.CLEAN, text)
        try:
            fields = _coerce(json.loads(repair_escapes(candidate), strict=False))
        except ValueError:
            fields = None
        if fields is not None:
            return ValidationVerdict(*fields, ParseStatus.REPAIRED, text)
    vul = _FIELD_VUL.search(text)
    conf = _FIELD_CONF.search(text)
    if vul and conf and 1 <= int(conf.group(1)) <= 5:
        just = _FIELD_JUST.search(text)
        return ValidationVerdict(vul.group(1).lower() == "true", int(conf.group(1)),
                                 just.group(1) if just else "", ParseStatus.FALLBACK, text)
    return ValidationVerdict.failed(text)


# --- providers ------------------------------------------------------------

class ProviderKind(str, enum.Enum):
    REMOTE = "REMOTE"
    REPLAY = "REPLAY"


@dataclasses.dataclass(frozen=True)
class LlmProviderConfig:
    kind: ProviderKind = ProviderKind.REPLAY
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env: str = "LLM_API_KEY"
    fixture_path: str = ""
    temperature: float = 0.0
    runs: int = 1
    max_in_flight: int = 4
    prompt_budget: int = DEFAULT_PROMPT_BUDGET
    timeout: float = 120.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProviderKind(self.kind))
        if self.temperature != 0.0:
            raise ValueError("temperature is fixed at 0.0")
        if self.runs < 1 or self.max_in_flight < 1:
            raise ValueError("runs and max_in_flight must be >= 1")

    @classmethod
    def from_json(cls, obj: dict) -> "LlmProviderConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in fields})


class LlmProvider(Protocol):
    def complete(self, prompt: str, run: int = 0) -> str: ...

    def fingerprint(self) -> str: ...


class ReplayProvider:
    """Content-addressed responses from a JSON Lines fixture of
    ``{prompt_digest, response_text}`` rows.

    Several rows for one digest are served in file order, ``run`` selecting
    among them cyclically.
    """

    def __init__(self, responses: dict[str, list[str]], source: str = ""):
        self._responses = responses
        self._source = source

    @classmethod
    def from_file(cls, path) -> "ReplayProvider":
        path = Path(path)
        responses: dict[str, list[str]] = {}
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    responses.setdefault(row["prompt_digest"], []).append(row["response_text"])
        return cls(responses, hashlib.sha256(path.read_bytes()).hexdigest())

    def has(self, prompt: str) -> bool:
        return prompt_digest(prompt) in self._responses

    def complete(self, prompt: str, run: int = 0) -> str:
        digest = prompt_digest(prompt)
        answers = self._responses.get(digest)
        if not answers:
            raise FixtureMiss(digest)
        return answers[run % len(answers)]

    def fingerprint(self) -> str:
        if not self._source:
            blob = json.dumps(self._responses, sort_keys=True).encode("utf-8")
            return "replay:" + hashlib.sha256(blob).hexdigest()
        return "replay:" + self._source


class RemoteProvider:
    """Chat-style JSON over HTTP: ``{model, temperature, messages}`` in, the
    first text part of the reply out."""

    def __init__(self, config: LlmProviderConfig, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._sleep = sleep
        self._key = os.environ.get(config.api_key_env or "LLM_API_KEY", "")
        if not self._key:
            raise ProviderUnavailable(f"environment variable {config.api_key_env} is not set")

    def complete(self, prompt: str, run: int = 0) -> str:
        body = post_json_with_retry(
            self.config.endpoint_url,
            {"model": self.config.model_name, "temperature": 0.0,
             "messages": [{"role": "user", "content": prompt}]},
            {"Authorization": f"Bearer {self._key}"},
            self.config.timeout,
            self._sleep,
        )
        text = first_text_part(body)
        if text is None:
            raise ProviderUnavailable("LLM response has no text part")
        return text

    def fingerprint(self) -> str:
        return f"remote:{self.config.model_name}@{self.config.endpoint_url}"


def first_text_part(body) -> str | None:
    if not isinstance(body, dict):
        return None
    content = body.get("content")
    if isinstance(content, str):
        return content
    if isinstance(content, list):
        for part in content:
            if isinstance(part, dict) and isinstance(part.get("text"), str):
                return part["text"]
    choices = body.get("choices")
    if isinstance(choices, list) and choices:
        message = choices[0].get("message", {}) if isinstance(choices[0], dict) else {}
        if isinstance(message.get("content"), str):
            return message["content"]
    return None


def make_provider(config: LlmProviderConfig, base_dir=None) -> LlmProvider:
    if config.kind is ProviderKind.REPLAY:
        path = Path(config.fixture_path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return ReplayProvider.from_file(path)
    return RemoteProvider(config)


# --- validation -----------------------------------------------------------

def aggregate(verdicts: Sequence[ValidationVerdict]) -> ValidationVerdict:
    """Majority vote over parsed runs (a tie counts as vulnerable), median-low
    confidence, justification from the first run agreeing with the majority."""
    counted = [v for v in verdicts if v.parse_status is not ParseStatus.FAILED]
    if not counted:
        return verdicts[0] if verdicts else ValidationVerdict.failed()
    yes = sum(1 for v in counted if v.is_vulnerable)
    decision = yes * 2 >= len(counted)
    lead = next(v for v in counted if v.is_vulnerable == decision)
    confidence = statistics.median_low(v.confidence_level for v in counted)
    return ValidationVerdict(decision, confidence, lead.justification, lead.parse_status, lead.raw_response)


def validate_runs(provider: LlmProvider, req: ValidationRequest, runs: int = 1,
                  prompt_budget: int = DEFAULT_PROMPT_BUDGET) -> list[ValidationVerdict]:
    if req.size > prompt_budget:
        return [ValidationVerdict.failed("", PROMPT_TOO_LARGE)]
    prompt = render_prompt(req)
    return [extract_verdict(provider.complete(prompt, run)) for run in range(runs)]


def validate_candidate(provider: LlmProvider, req: ValidationRequest, runs: int = 1,
                       prompt_budget: int = DEFAULT_PROMPT_BUDGET) -> ValidationVerdict:
    return aggregate(validate_runs(provider, req, runs, prompt_budget))


def validate_many(provider: LlmProvider, requests_: Sequence[ValidationRequest], runs: int = 1,
                  max_in_flight: int = 4, prompt_budget: int = DEFAULT_PROMPT_BUDGET
                  ) -> list[list[ValidationVerdict]]:
    """Per-run verdicts for each request, in request order."""
    def one(req):
        return validate_runs(provider, req, runs, prompt_budget)

    if max_in_flight > 1 and len(requests_) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(one, requests_))
    return [one(r) for r in requests_]


def missing_digests(provider: ReplayProvider, requests_: Sequence[ValidationRequest],
                    prompt_budget: int = DEFAULT_PROMPT_BUDGET) -> list[str]:
    out = []
    for req in requests_:
        if req.size > prompt_budget:
            continue
        prompt = render_prompt(req)
        if not provider.has(prompt):
            out.append(prompt_digest(prompt))
    return sorted(set(out))

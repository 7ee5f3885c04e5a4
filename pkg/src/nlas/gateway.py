"""Model gateway: a real chat-completions HTTP client and a deterministic mock.

The mock behaves like an obedient but fallible model. It reads the prompt the
same way a model would (type specification for topic and stance, pattern block
for the component structure), fills every bracketed variable with a synthesized
phrase, and optionally injects exactly one defect. Both the defect decision and
the body text are pure functions of (profile, key), so runs replay bit for bit
and a second pass over the same key can succeed where the first failed (the
streams are separated by the profile salt).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import httpx

from .errors import AuthError, ExhaustedRetries, GatewayTimeout
from .prompts import PromptSpec
from .registry import GenerationKey

DEFECT_UNFILLED = "unfilled_variable"
DEFECT_MISSING = "missing_component"
DEFECT_MALFORMED = "malformed_document"
DEFECT_OFF_TOPIC = "off_topic"
DEFECT_KINDS = (DEFECT_UNFILLED, DEFECT_MISSING, DEFECT_MALFORMED, DEFECT_OFF_TOPIC)

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def _hash01(*parts: object) -> float:
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


@dataclass(frozen=True)
class MockProfile:
    """Deterministic defect profile for the mock model.

    defect_rates maps defect kind to probability; scheme_weights optionally
    scales the total defect probability per scheme acronym (a weight above 1
    makes a scheme harder, mirroring scheme-dependent model behaviour).
    """

    name: str
    seed: int
    defect_rates: Mapping[str, float] = field(default_factory=dict)
    scheme_weights: Mapping[str, float] = field(default_factory=dict)
    salt: str = ""

    def __post_init__(self) -> None:
        for kind, rate in self.defect_rates.items():
            if kind not in DEFECT_KINDS:
                raise ValueError(f"unknown defect kind: {kind}")
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"defect rate out of range for {kind}: {rate}")

    def total_rate(self, scheme: str) -> float:
        weight = self.scheme_weights.get(scheme, 1.0)
        return min(1.0, sum(self.defect_rates.values()) * weight)

    def defect_for(self, key: GenerationKey) -> str | None:
        """The single defect kind injected for this key, or None."""
        total = self.total_rate(key.scheme)
        if total <= 0.0:
            return None
        u = _hash01(self.seed, self.salt, "defect", key.language, key.scheme, key.topic_id, key.stance)
        if u >= total:
            return None
        base = sum(self.defect_rates.values())
        if base <= 0.0:
            return None
        cut = u / total * base
        acc = 0.0
        for kind in DEFECT_KINDS:
            acc += self.defect_rates.get(kind, 0.0)
            if cut < acc:
                return kind
        return DEFECT_KINDS[-1]

    @property
    def model_name(self) -> str:
        return f"mock-{self.name}"


@dataclass
class ModelEndpoint:
    """An OpenAI-style chat-completions endpoint."""

    base_url: str
    model_name: str
    api_key_env: str = "NLAS_API_KEY"
    max_in_flight: int = 4
    timeout_s: float = 60.0
    max_retries: int = 3
    temperature: float = 1.0


@dataclass(frozen=True)
class RawResponse:
    key: GenerationKey
    body: str
    model_name: str
    latency_ms: float
    attempt: int


@dataclass(frozen=True)
class BatchItemError:
    key: GenerationKey
    kind: str
    message: str
    attempt: int


# --- mock model ------------------------------------------------------------------

_LABEL_TO_ROLE = {
    "Major Premise": "major_premise",
    "Minor Premise": "minor_premise",
    "Premise": "premise",
    "Conclusion": "conclusion",
    "Premisa Mayor": "major_premise",
    "Premisa Menor": "minor_premise",
    "Premisa": "premise",
    "Conclusión": "conclusion",
}
_NUMBERED_LABEL_RE = re.compile(r"^(Premise|Premisa) ([1-9][0-9]*)$")

_STANCE_SPLIT = {
    ("en", "in_favour"): " in favour of ",
    ("en", "against"): " against ",
    ("es", "in_favour"): " a favor de ",
    ("es", "against"): " en contra de ",
}

_FILL_NOUNS_EN = (
    "the people involved", "careful observers", "independent reviewers",
    "experienced practitioners", "community representatives", "informed commentators",
)
_FILL_NOUNS_ES = (
    "las personas implicadas", "observadores atentos", "analistas independientes",
    "profesionales con experiencia", "representantes de la comunidad", "comentaristas informados",
)
_OFF_TOPIC_DECOY = {
    "en": "everyday gardening habits",
    "es": "los hábitos cotidianos de jardinería",
}
_MALFORMED_BODY = {
    "en": "I am sorry, I cannot lay that out as a structured answer right now.",
    "es": "Lo siento, ahora mismo no puedo presentarlo como una respuesta estructurada.",
}


def _parse_pattern_block(pattern_block: str) -> list[tuple[str, str]]:
    """Recover (role, pattern) pairs from the rendered pattern block."""
    parsed: list[tuple[str, str]] = []
    for line in pattern_block.splitlines():
        label, sep, pattern = line.partition(": ")
        if not sep:
            raise ValueError(f"cannot parse pattern line: {line!r}")
        role = _LABEL_TO_ROLE.get(label)
        if role is None:
            m = _NUMBERED_LABEL_RE.match(label)
            if not m:
                raise ValueError(f"unknown component label: {label!r}")
            role = f"premise_{m.group(2)}"
        parsed.append((role, pattern))
    return parsed


def _topic_phrase(prompt: PromptSpec) -> str:
    sep = _STANCE_SPLIT[(prompt.key.language, prompt.key.stance)]
    _, found, rest = prompt.type_specification.partition(sep)
    if not found:
        raise ValueError(f"cannot locate topic in: {prompt.type_specification!r}")
    return rest.rstrip(".").strip()


def _fill_phrase(profile: MockProfile, key: GenerationKey, variable: str, topic: str) -> str:
    pick = _hash01(profile.seed, profile.salt, "fill", key.language, key.scheme,
                   key.topic_id, key.stance, variable)
    if key.language == "en":
        noun = _FILL_NOUNS_EN[int(pick * len(_FILL_NOUNS_EN))]
        marker = "support" if key.stance == "in_favour" else "oppose"
        return f"{noun} connected with {topic} who clearly {marker} it"
    noun = _FILL_NOUNS_ES[int(pick * len(_FILL_NOUNS_ES))]
    marker = "apoyan" if key.stance == "in_favour" else "rechazan"
    return f"{noun} en relación con {topic} que claramente lo {marker}"


def generate_mock(profile: MockProfile, prompt: PromptSpec) -> RawResponse:
    """Deterministic mock response for one prompt, with at most one defect."""
    key = prompt.key
    defect = profile.defect_for(key)

    if defect == DEFECT_MALFORMED:
        return RawResponse(key=key, body=_MALFORMED_BODY[key.language],
                           model_name=profile.model_name, latency_ms=0.0, attempt=1)

    components = _parse_pattern_block(prompt.pattern_block)
    topic = _topic_phrase(prompt)
    if defect == DEFECT_OFF_TOPIC:
        topic = _OFF_TOPIC_DECOY[key.language]

    variables: list[str] = []
    for _, pattern in components:
        for v in re.findall(r"\[([^\[\]]+)\]", pattern):
            if v not in variables:
                variables.append(v)
    fills = {v: _fill_phrase(profile, key, v, topic) for v in variables}

    if defect == DEFECT_UNFILLED:
        victim = variables[int(_hash01(profile.seed, profile.salt, "unfilled", *key.as_dict().values())
                               * len(variables))]
        fills[victim] = f"[{victim}]"

    doc: dict[str, str] = {}
    for role, pattern in components:
        text = pattern
        for v, phrase in fills.items():
            text = text.replace(f"[{v}]", phrase)
        doc[role] = text

    if defect == DEFECT_MISSING:
        roles = list(doc)
        victim_role = roles[int(_hash01(profile.seed, profile.salt, "missing", *key.as_dict().values())
                                * len(roles))]
        del doc[victim_role]

    body = json.dumps(doc, ensure_ascii=False, indent=2)
    if _hash01(profile.seed, profile.salt, "fence", *key.as_dict().values()) < 0.3:
        body = f"```json\n{body}\n```"
    return RawResponse(key=key, body=body, model_name=profile.model_name,
                       latency_ms=0.0, attempt=1)


# --- HTTP client -------------------------------------------------------------------

def generate(
    endpoint: ModelEndpoint,
    prompt: PromptSpec,
    *,
    client: httpx.Client | None = None,
    sleep=time.sleep,
) -> RawResponse:
    """Call a chat-completions endpoint with bounded retry and backoff."""
    api_key = os.environ.get(endpoint.api_key_env, "") if endpoint.api_key_env else ""
    if endpoint.api_key_env and not api_key:
        raise AuthError(f"environment variable {endpoint.api_key_env} is not set")

    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {
        "model": endpoint.model_name,
        "messages": [{"role": "user", "content": prompt.rendered}],
        "temperature": endpoint.temperature,
    }
    url = endpoint.base_url.rstrip("/") + "/chat/completions"

    own_client = client is None
    http = client or httpx.Client(timeout=endpoint.timeout_s)
    start = time.monotonic()
    last_cause = ""
    timed_out = False
    try:
        attempts = endpoint.max_retries + 1
        for attempt in range(1, attempts + 1):
            try:
                resp = http.post(url, json=payload, headers=headers)
            except httpx.TimeoutException as exc:
                last_cause = f"timeout: {exc}"
                timed_out = True
            else:
                timed_out = False
                if resp.status_code in (401, 403):
                    raise AuthError(f"endpoint rejected credentials: HTTP {resp.status_code}")
                if resp.status_code == 200:
                    data = resp.json()
                    try:
                        body = data["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError):
                        raise ExhaustedRetries(
                            "response missing choices[0].message.content",
                            cause="malformed completion payload",
                        ) from None
                    latency_ms = (time.monotonic() - start) * 1000.0
                    return RawResponse(key=prompt.key, body=body,
                                       model_name=endpoint.model_name,
                                       latency_ms=latency_ms, attempt=attempt)
                last_cause = f"HTTP {resp.status_code}"
                if resp.status_code not in _RETRYABLE_STATUS:
                    raise ExhaustedRetries(
                        f"non-retryable response: HTTP {resp.status_code}", cause=last_cause
                    )
            if attempt < attempts:
                sleep(min(0.25 * 2 ** (attempt - 1), 8.0))
        if timed_out:
            raise GatewayTimeout(f"all {attempts} attempts timed out", cause=last_cause)
        raise ExhaustedRetries(f"retry budget exhausted after {attempts} attempts",
                               cause=last_cause)
    finally:
        if own_client:
            http.close()


def batch_generate(
    target: Union[MockProfile, ModelEndpoint],
    prompts: Sequence[PromptSpec],
    *,
    sleep=time.sleep,
) -> list[Union[RawResponse, BatchItemError]]:
    """Generate a batch, preserving input order; per-item failures become items."""
    if not prompts:
        raise ValueError("batch_generate requires a non-empty prompt list")
    if isinstance(target, MockProfile):
        return [generate_mock(target, p) for p in prompts]

    def one(p: PromptSpec) -> Union[RawResponse, BatchItemError]:
        try:
            return generate(target, p, sleep=sleep)
        except AuthError:
            raise
        except ExhaustedRetries as exc:
            return BatchItemError(key=p.key, kind=type(exc).__name__,
                                  message=str(exc), attempt=target.max_retries + 1)

    with ThreadPoolExecutor(max_workers=max(1, target.max_in_flight)) as pool:
        return list(pool.map(one, prompts))

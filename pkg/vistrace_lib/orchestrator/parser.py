"""
Tool-call syntax of model outputs. A call is a fenced block::

    ```tool
    {"tool": "zoom", "arguments": {"bbox": [10, 10, 64, 64]}}
    ```

Text without such a block is a final answer.
"""

import json
import re
from typing import Optional

from vistrace_lib.tooling.components import TOOL_SPECS, ToolCall
from vistrace_lib.tooling.registry import ToolRegistry
from vistrace_lib.utils.errors import MalformedCall

TOOL_BLOCK = re.compile(r"```tool[ \t]*\r?\n(.*?)```", re.DOTALL)
ANSWER_PREFIX = re.compile(r"answer\s*:\s*(.+)", re.IGNORECASE | re.DOTALL)


def parse_tool_call(model_text: str,
                    registry: Optional[ToolRegistry] = None,
                    round_no: int = 0) -> Optional[ToolCall]:
    """
    Extract the first fenced tool block.
    Args:
        model_text (str): Raw model output.
        registry (Optional[ToolRegistry]): Registry to validate against (all known tools when None).
        round_no (int): Round number stored in the call.
    Returns:
        Optional[ToolCall]: The call, or None when the text has no block.
    Raises:
        MalformedCall: The block is not JSON, lacks fields or fails schema validation.
    """
    match = TOOL_BLOCK.search(model_text)
    if match is None:
        return None
    try:
        body = json.loads(match.group(1))
    except json.JSONDecodeError as exc:
        raise MalformedCall(f"tool block is not valid JSON: {exc}") from exc
    if not isinstance(body, dict) or "tool" not in body:
        raise MalformedCall("tool block must be an object with a 'tool' field")
    arguments = body.get("arguments", {})

    if registry is not None:
        return registry.make_call(body["tool"], arguments, round_no)
    name = body["tool"]
    if not isinstance(name, str) or name not in TOOL_SPECS:
        raise MalformedCall(f"unknown tool {name!r}")
    TOOL_SPECS[name].validate(arguments)
    return ToolCall(tool=name, arguments=dict(arguments), round=round_no)


def extract_final_answer(model_text: str) -> str:
    """Text after the last 'Answer:' marker, or the whole stripped text."""
    matches = list(ANSWER_PREFIX.finditer(model_text))
    if not matches:
        return model_text.strip()
    return matches[-1].group(1).strip()

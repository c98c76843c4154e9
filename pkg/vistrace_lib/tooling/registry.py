"""
Tool registry: maps tool names to their specification and backend. A registry is never
modified in place; ``register`` and ``restricted_to`` return new registries, so one
registry can be shared by concurrent episodes.
"""

from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple

from vistrace_lib.tooling.components import ToolCall, ToolContext, ToolResult, ToolSpec
from vistrace_lib.utils.errors import DuplicateTool, MalformedCall
from vistrace_lib.utils.logger import logger

Backend = Callable[[ToolCall, ToolContext], ToolResult]


class ToolRegistry:
    """Immutable name -> (ToolSpec, backend) table with validation and dispatch."""

    def __init__(self, entries: Optional[Mapping[str, Tuple[ToolSpec, Backend]]] = None):
        self._entries: Dict[str, Tuple[ToolSpec, Backend]] = dict(entries or {})

    @classmethod
    def empty(cls) -> "ToolRegistry":
        return cls()

    def register(self, spec: ToolSpec, backend: Backend) -> "ToolRegistry":
        """
        Return a new registry that also routes ``spec.name`` to ``backend``.
        Raises:
            DuplicateTool: If the name is already registered.
        """
        if spec.name in self._entries:
            raise DuplicateTool(f"tool '{spec.name}' is already registered")
        entries = dict(self._entries)
        entries[spec.name] = (spec, backend)
        return ToolRegistry(entries)

    def restricted_to(self, names: Iterable[str]) -> "ToolRegistry":
        wanted = set(names)
        return ToolRegistry({name: entry for name, entry in self._entries.items() if name in wanted})

    def without(self, names: Iterable[str]) -> "ToolRegistry":
        dropped = set(names)
        return ToolRegistry({name: entry for name, entry in self._entries.items() if name not in dropped})

    @property
    def names(self) -> List[str]:
        return list(self._entries)

    @property
    def specs(self) -> List[ToolSpec]:
        return [spec for spec, _ in self._entries.values()]

    def spec(self, name: str) -> ToolSpec:
        return self._entries[name][0]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def make_call(self, name: Any, arguments: Any, round_no: int = 0) -> ToolCall:
        """Validate a call against the registry and the tool schema."""
        if not isinstance(name, str) or name not in self._entries:
            raise MalformedCall(f"unknown tool {name!r}; available: {self.names}")
        self._entries[name][0].validate(arguments)
        return ToolCall(tool=name, arguments=dict(arguments), round=round_no)

    def dispatch(self, call: ToolCall, context: ToolContext) -> ToolResult:
        """
        Run the backend of ``call.tool``.
        Args:
            call (ToolCall): Validated call.
            context (ToolContext): Episode state the tool reads and updates.
        Returns:
            ToolResult: Backend output.
        """
        if call.tool not in self._entries:
            raise MalformedCall(f"unknown tool '{call.tool}'")
        spec, backend = self._entries[call.tool]
        result = backend(call, context)
        if result.kind not in (spec.result_kind, "error"):
            logger.warning("Tool '%s' returned kind '%s', expected '%s'.", call.tool, result.kind, spec.result_kind)
        return result

    def describe(self) -> str:
        return "\n".join(f"- {spec.usage()}" for spec in self.specs)


def register(registry: ToolRegistry, spec: ToolSpec, backend: Backend) -> ToolRegistry:
    return registry.register(spec, backend)

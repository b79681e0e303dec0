"""Prompt templates for view generation.

Bump PROMPT_VERSION whenever any template text changes: it is part of the
view cache key.
"""

PROMPT_VERSION = "views-v1"

_HISTORY = "A user interacted with these items in order:\n{titles}\n"
_TAIL = " One item title per line, nothing else."

PROMPT_TEMPLATES = {
    "future": _HISTORY + "List {n} items this user would likely interact with next." + _TAIL,
    "paraphrase": _HISTORY + (
        "Rewrite this history as {n} items expressing the same preferences, "
        "substituting close alternatives where natural and keeping the order mostly intact."
    ) + _TAIL,
    "counterfactual": _HISTORY + (
        "List {n} items this user would NOT choose, items clearly misaligned with these preferences."
    ) + _TAIL,
}

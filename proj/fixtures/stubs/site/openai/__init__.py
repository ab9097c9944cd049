"""Offline stand-in for the legacy openai completion API.

Answers are canned and deterministic so that generated verification scripts
can run inside the sandbox without network access or credentials.
"""

_ONE_WORD = "Provide a one-word answer:"

_ANSWERS = {
    "capital of france": "Paris",
    "2+2": "4",
    "1 + 1": "2",
    "sky blue": "Yes",
    "mockingbird": "Lee",
    "chemical symbol for gold": "Au",
    "first president": "Washington",
    "largest planet": "Jupiter",
    "boiling point of water": "100",
}

api_key = None


class _Choice:
    def __init__(self, text):
        self.text = text


class _Completion:
    def __init__(self, text):
        self.choices = [_Choice(text)]


def _answer(prompt):
    lowered = prompt.lower()
    for key, value in _ANSWERS.items():
        if key in lowered:
            return value
    return "Unknown"


class Completion:
    @staticmethod
    def create(engine=None, prompt="", max_tokens=16, **kwargs):
        if engine is None:
            raise TypeError("engine is required")
        answer = _answer(prompt)
        if prompt.strip().startswith(_ONE_WORD):
            text = " " + answer
        else:
            text = " The answer is " + answer + "."
        words = text.split()
        return _Completion(" " + " ".join(words[:max_tokens]))

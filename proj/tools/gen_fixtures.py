#!/usr/bin/env python3
"""Regenerate the replay fixtures.

Canned model responses are authored here. For each scenario they are written
to a scratch directory, and fixture_builder runs the pipeline against them to
record the request fingerprints the pipeline really produces.

    python3 tools/gen_fixtures.py --builder build/fixture_builder

Rerun whenever templates/, fixtures/problem.txt or the request format change.
"""

import argparse
import json
import random
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"


def fence(code, lead="", tail=""):
    text = ""
    if lead:
        text += lead + "\n\n"
    text += "```python\n" + code + "```\n"
    if tail:
        text += "\n" + tail + "\n"
    return text


CANDIDATES = """\
1. Explicit output format: stating the expected answer format in the prompt
   (one word, one number) removes the model's reason to add framing text.
2. Few-shot demonstrations: a handful of question/answer pairs with bare
   answers placed before the real question make the model imitate the format.
3. Answer extraction: a second prompt that asks the model to return only the
   final answer contained in its first reply strips the surrounding text.
4. Output length limits: capping the number of generated tokens leaves no
   room for lengthy preambles.
"""

PROSE = {
    "format": {
        "hypothesis": """\
Selected hypothesis: explicit output format

Prefixing a question with an explicit format instruction, for example
"Provide a one-word answer: What is 1 + 1?", makes the model reply with the
bare answer instead of embedding it in additional sentences.

Why this one: it needs no data set, no extra model and no tooling beyond
sending a plain and a prefixed version of the same question, so it can be
checked directly by comparing the two replies.
""",
        "representation": """\
Let Q be a set of factual questions whose correct answer is one word.
For q in Q let r(q) be the reply to q and r'(q) the reply to the prefixed
prompt "Provide a one-word answer: " + q. Let w(x) be the number of
whitespace-separated words in x.

H: for most q in Q, w(r'(q)) <= w(r(q)).
H is supported when the share of questions with w(r'(q)) <= w(r(q)) is
greater than 0.5.
""",
        "plan": """\
1. Data: write down a small list of factual questions with one-word answers.
2. Conditions: for every question build the plain prompt and the prompt with
   the "Provide a one-word answer:" prefix.
3. Collection: query the completion API once per prompt and keep both replies.
4. Metric: count the words of each reply; a question is a success when the
   prefixed reply is not longer than the plain one.
5. Decision: compute the success rate and report the hypothesis as supported
   when it exceeds 0.5.
6. Reporting: save every reply pair with its success flag to report.csv.
""",
    },
    "fewshot": {
        "hypothesis": """\
Selected hypothesis: few-shot demonstrations

Placing a few question/answer pairs whose answers are bare values in front
of a question leads the model to answer that question with the bare value.

Why this one: the demonstrations are cheap to write and the effect can be
measured by exact comparison with known answers.
""",
        "representation": """\
Let D be k demonstration pairs (q_i, a_i) with bare answers and Q a set of
test questions with reference answers a(q). Let m(x, a) = 1 when x equals a
after trimming whitespace and 0 otherwise.

H: mean over Q of m(reply(D + q), a(q)) > mean over Q of m(reply(q), a(q)).
""",
        "plan": """\
1. Write three test questions with known short answers.
2. Write two demonstration pairs with bare answers.
3. Ask every test question with and without the demonstrations in front.
4. Score each reply by exact match with the reference answer.
5. Compare the exact-match rates of the two conditions and print the verdict.
""",
    },
    "extract": {
        "hypothesis": """\
Selected hypothesis: answer extraction pass

Sending the model's first reply back with a request to return only the final
answer yields text that matches the reference answer exactly more often than
the first reply does.

Why this one: it uses the same model twice and needs nothing else.
""",
        "representation": """\
For a question q with reference answer a(q), let r1(q) be the first reply and
r2(q) the reply to "Return only the final answer in: " + r1(q).
Let m(x, a) be 1 for an exact match after trimming and 0 otherwise.

H: sum over q of m(r2(q), a(q)) >= sum over q of m(r1(q), a(q)).
""",
        "plan": """\
1. Prepare a short list of questions with reference answers.
2. Collect the first reply for each question.
3. Ask the model to return only the final answer contained in that reply.
4. Count exact matches for both replies and compare the totals.
""",
    },
    "length": {
        "hypothesis": """\
Selected hypothesis: output length limit

Limiting the number of tokens the model may generate reduces the amount of
text produced around the answer.

Why this one: the limit is a single request parameter, so both conditions
can be run with the same prompts.
""",
        "representation": """\
Let L(x) be the number of words in reply x. For each question q, compare
L(reply(q, limit=16)) with L(reply(q, limit=3)).

H: the mean of L under the small limit is lower than under the large limit.
""",
        "plan": """\
1. Choose five factual questions.
2. Query each question with a generous and with a tight token limit.
3. Record the word count of every reply.
4. Compare the mean word counts and print whether the hypothesis holds.
""",
    },
    "training": {
        "hypothesis": """\
Selected hypothesis: answer-only fine-tuning data

The problem could be addressed by training the model on a corpus in which
every reply consists of the answer alone, so that it stops producing
framing sentences.

Why this one: it targets the behaviour at its source.
""",
        "representation": """\
Let M be the base model and M' the model after training the model on pairs
(q, a) with bare answers. For a question set Q let e(M) be the fraction of
replies equal to the reference answer.

H: e(M') > e(M).
""",
        "plan": """\
1. Collect question/answer pairs with bare answers.
2. Score the base model by exact match on held-out questions.
3. Compare against the score reported for an answer-only tuned variant.
4. Print the difference.
""",
    },
}

QUESTION_SETS = [
    ["What is the capital of France?", "What is 2+2?", "Is the sky blue?"],
    ["What is 1 + 1?", "What is the largest planet in the solar system?",
     "What is the chemical symbol for gold?"],
    ["Who was the first president of the United States?", "What is 2+2?",
     "What is the boiling point of water in Celsius?"],
]

INSTALL_OK = """\
import subprocess
import sys

for package in ["openai", "pandas"]:
    subprocess.check_call([sys.executable, "-m", "pip", "install", package])
"""

INSTALL_BROKEN = """\
import subprocess
import sys

packages = ["openai", "openai-prompt-toolkit"]
for package in packages:
    subprocess.check_call([sys.executable, "-m", "pip", "install", package])
"""


def q_literal(questions):
    return "[\n" + "".join("    %r,\n" % q for q in questions) + "]"


def script_ok(questions, engine="text-davinci-002"):
    return f"""\
import openai
import pandas as pd

questions = {q_literal(questions)}


def complete(prompt):
    response = openai.Completion.create(engine="{engine}", prompt=prompt, max_tokens=4)
    return response.choices[0].text.strip()


rows = []
for question in questions:
    plain = complete(question)
    prefixed = complete("Provide a one-word answer: " + question)
    rows.append((question, plain, prefixed, len(prefixed.split()) <= len(plain.split())))

report = pd.DataFrame(rows, columns=["question", "plain", "prefixed", "success"])
rate = report["success"].mean()
print(f"success rate: {{rate:.2f}}")
print("The hypothesis is supported." if rate > 0.5 else "The hypothesis is not supported.")
report.to_csv("report.csv", index=False)
"""


def script_needs_file(questions):
    # First drafts that assume a data file exists; the failure message is
    # produced with sys.exit so it does not depend on traceback formatting.
    return f"""\
import os
import sys

import openai

DATA_FILE = "questions.txt"
if not os.path.exists(DATA_FILE):
    sys.exit("FileNotFoundError: " + DATA_FILE + " was not found in the working directory")

with open(DATA_FILE) as handle:
    questions = [line.strip() for line in handle if line.strip()]

for question in questions:
    response = openai.Completion.create(engine="text-davinci-002", prompt=question, max_tokens=4)
    print(question, "->", response.choices[0].text.strip())
"""


def script_bad_symbol():
    return """\
import openai

# Initialize the LLM
llm = openai.LanguageModel()
print(llm.complete("Provide a one-word answer: What is 1 + 1?"))
"""


def script_ellipsis_fail():
    return """\
import sys

import openai

general_prompts = [...]  # Replace with your general prompts
specific_prompts = [...]  # Replace with your specific prompts

if not all(isinstance(p, str) for p in general_prompts + specific_prompts):
    sys.exit("TypeError: prompt lists must contain strings, found a non-text entry")

for prompt in general_prompts + specific_prompts:
    print(openai.Completion.create(engine="text-davinci-002", prompt=prompt, max_tokens=4).choices[0].text)
"""


def script_stub_fail():
    return """\
import sys


def ask_llm(question):
    return "Placeholder response"


general_questions = ["What is 1 + 1?", "What is 2+2?"]
responses = [ask_llm(q) for q in general_questions]
if any(r == "Placeholder response" for r in responses):
    sys.exit("RuntimeError: no model responses were collected")
"""


def script_comments_only():
    return """\
import openai

math_questions = [
    # Add your list of questions here
    # Each entry pairs a plain question with its specific version
]

for plain, specific in math_questions:
    print(plain, specific)
"""


def script_key_placeholder_fail():
    return """\
import openai

# Initialize OpenAI
openai.api_key = 'your-api-key'
llm = openai.LanguageModel()
print(llm.complete("What is 1 + 1?"))
"""


def script_ttest_ok(questions):
    return f"""\
import openai
from scipy import stats

questions = {q_literal(questions)}


def words(prompt):
    reply = openai.Completion.create(engine="text-davinci-002", prompt=prompt, max_tokens=8)
    return len(reply.choices[0].text.split())


general_lengths = [words(q) for q in questions]
specific_lengths = [words("Provide a one-word answer: " + q) for q in questions]
print("general:", general_lengths)
print("specific:", specific_lengths)
print("The hypothesis is supported." if sum(specific_lengths) < sum(general_lengths) else "The hypothesis is not supported.")
"""


def prose_responses(kind):
    p = PROSE[kind]
    return [CANDIDATES, p["hypothesis"], p["representation"], p["plan"]]


def code_responses(verify, install, draft=None):
    draft = verify if draft is None else draft
    return [
        fence(draft, "The following code carries out the verification plan."),
        fence(verify, "Here is the revised code."),
        fence(install, "This script installs the packages the code needs."),
    ]


def repair_response(code):
    return fence(code, "The error is fixed in the updated code below.")


def appendix_c():
    listing1 = (FIX / "listing1.py").read_text()
    install = (FIX / "install_appendix_c.py").read_text()
    draft = listing1.replace("import pandas as pd\n", "import pandas as pd\n\nopenai.api_key = \"your-api-key\"\n", 1)
    return prose_responses("format") + [
        fence(draft, "The following code carries out the verification plan.",
              "Set your API key before running the script."),
        fence(listing1, "Here is the revised code."),
        fence(install, "This script installs the packages the code needs."),
    ]


def repair_success():
    qs = QUESTION_SETS[1]
    return (prose_responses("format")
            + code_responses(script_needs_file(qs), INSTALL_OK)
            + [repair_response(script_ok(qs))])


def repair_failure():
    return (prose_responses("fewshot")
            + code_responses(script_needs_file(QUESTION_SETS[2]), INSTALL_OK)
            + [repair_response(script_bad_symbol())])


def paper_run_trials():
    """50 trials: 13 end-to-end, 4 infeasible, 7 clean but never executable,
    10 dirty with a failing install, 16 dirty and failing twice."""
    feasible_kinds = ["format", "fewshot", "extract", "length"]
    trials = []
    for i in range(10):
        qs = QUESTION_SETS[i % 3]
        verify = script_ttest_ok(qs) if i % 4 == 3 else script_ok(qs)
        trials.append(prose_responses(feasible_kinds[i % 4]) + code_responses(verify, INSTALL_OK))
    for i in range(3):
        qs = QUESTION_SETS[i % 3]
        trials.append(prose_responses(feasible_kinds[i % 4]) + code_responses(script_needs_file(qs), INSTALL_OK)
                      + [repair_response(script_ok(qs))])
    for i in range(4):
        trials.append(prose_responses("training") + code_responses(script_ok(QUESTION_SETS[i % 3]), INSTALL_OK))
    for i in range(7):
        qs = QUESTION_SETS[i % 3]
        trials.append(prose_responses(feasible_kinds[i % 4]) + code_responses(script_needs_file(qs), INSTALL_OK)
                      + [repair_response(script_bad_symbol())])
    for i in range(10):
        dirty = script_comments_only() if i % 2 else script_ellipsis_fail()
        trials.append(prose_responses(feasible_kinds[i % 4]) + code_responses(dirty, INSTALL_BROKEN))
    for i in range(16):
        first = script_ellipsis_fail() if i % 2 else script_stub_fail()
        trials.append(prose_responses(feasible_kinds[i % 4]) + code_responses(first, INSTALL_OK)
                      + [repair_response(script_key_placeholder_fail())])
    random.Random(50).shuffle(trials)
    return trials


def build(builder, config, responses, out):
    with tempfile.TemporaryDirectory() as tmp:
        for n, text in enumerate(responses, 1):
            Path(tmp, f"{n:02d}.txt").write_text(text)
        result = subprocess.run([builder, "transcript", "--config", str(config), "--responses", tmp,
                                 "--out", str(out)], capture_output=True, text=True)
        if result.returncode != 0:
            sys.exit(f"fixture_builder failed for {out}:\n{result.stderr}")
        print(f"{out.relative_to(ROOT)}: {len(responses)} entries; {result.stderr.strip()}")


def paper_funnel():
    """Per-trial flags matching the reported 50-trial outcome counts."""
    def flags(feasible, clean, executable, install):
        return {"hypothesis_feasible": feasible, "plan_present": True, "code_lint_clean": clean,
                "verify_executable": executable, "install_ok": install,
                "end_to_end": feasible and clean and executable and install}
    rows = ([flags(True, True, True, True)] * 13 + [flags(False, True, True, False)] * 4
            + [flags(True, True, False, False)] * 7 + [flags(True, False, False, False)] * 26)
    rows = [dict(r) for r in rows]
    random.Random(46).shuffle(rows)
    return {"description": "Per-trial outcome flags for a 50-trial batch: 46 feasible hypotheses, "
                           "24 suitable verification scripts, 17 executable, 13 successful end to end.",
            "trials": rows}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--builder", required=True)
    ap.add_argument("--config", default=str(FIX / "replay.conf"))
    args = ap.parse_args()

    (FIX / "transcripts").mkdir(exist_ok=True)
    build(args.builder, args.config, appendix_c(), FIX / "transcripts" / "appendix_c.jsonl")
    build(args.builder, args.config, repair_success(), FIX / "transcripts" / "repair_success.jsonl")
    build(args.builder, args.config, repair_failure(), FIX / "transcripts" / "repair_failure.jsonl")

    run_dir = FIX / "paper_run"
    run_dir.mkdir(exist_ok=True)
    for old in run_dir.glob("*.jsonl"):
        old.unlink()
    for n, responses in enumerate(paper_run_trials(), 1):
        build(args.builder, args.config, responses, run_dir / f"trial_{n:02d}.jsonl")

    (FIX / "paper_funnel.json").write_text(json.dumps(paper_funnel(), indent=2) + "\n")


if __name__ == "__main__":
    main()

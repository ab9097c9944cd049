import sys

# Packages the fixture environment provides (real or stubbed).
AVAILABLE = {"openai", "pandas", "numpy", "scipy"}


def main(argv):
    if len(argv) < 2 or argv[0] != "install":
        print("usage: pip install <package>...", file=sys.stderr)
        return 2
    status = 0
    for spec in argv[1:]:
        if spec.startswith("-"):
            continue
        name = spec.split("==")[0].split(">=")[0].strip().lower()
        if name in AVAILABLE:
            print("Requirement already satisfied: " + name)
        else:
            print("ERROR: Could not find a version that satisfies the requirement " + spec, file=sys.stderr)
            print("ERROR: No matching distribution found for " + spec, file=sys.stderr)
            status = 1
    return status


sys.exit(main(sys.argv[1:]))

from pathlib import Path


def read_requirements(filename: str) -> list:
    """
    Requirement lines of a requirements file, without comments, blank lines
    and lines marked with `# req: ignore`.
    """
    path = Path(__file__).parent / filename
    reqs = []
    for line in path.read_text().splitlines():
        if "req: ignore" in line:
            continue
        line = line.split("#", 1)[0].strip()
        if line:
            reqs.append(line)
    return reqs


reqs = read_requirements("requirements.txt")
test_reqs = read_requirements("requirements-test.txt")

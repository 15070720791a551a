"""Synthetic commit generator with two individually sufficient views.

Security commits draw message words from a security vocabulary and diff
lines that use memory/bounds APIs; other commits draw from neutral pools.
With probability ``noise`` a commit's message comes from the other class's
pool, which degrades the text view only.
"""

from dataclasses import dataclass, field
from typing import Dict, List

from .ingest import Commit
from .rng import LCG64

SECURITY_WORDS = (
    "overflow", "vulnerability", "sanitize", "injection", "exploit", "leak",
    "privilege", "unsafe",
)
NEUTRAL_WORDS = (
    "feature", "refactor", "docs", "cleanup", "rename", "style", "release",
    "typo",
)
SHARED_WORDS = (
    "fix", "update", "change", "handle", "code", "module", "function", "parser",
    "driver", "network", "input", "request", "file", "path", "test", "core",
)

# each template exercises different sensitive tokens
SECURITY_ADDED = (
    "if (length > size) return -EINVAL;",
    "memcpy(dst, src, len);",
    "strncpy(name, input, sizeof(name) - 1);",
    "if (ptr == null) return -ENOMEM;",
    "kfree(obj);",
    "mutex_lock(&dev->lock);",
    "buf = malloc(n);",
    "tmp = realloc(tmp, want);",
    "p = calloc(count, 8);",
    "n = strlen(src);",
    "check(bounds);",
    "if (overflow) goto fail;",
    "free(entry);",
    "unlock(dev);",
    "mutex_init(&mutex);",
)
SECURITY_REMOVED = (
    "strcpy(name, input);",
    "sprintf(out, fmt, arg);",
    "strcat(path, suffix);",
    "memcpy(dst, src, n);",
    "free(obj);",
)
NEUTRAL_LINES = (
    'printf("%d items\\n", count);',
    "return result;",
    "int total = a + b;",
    'log_info("starting");',
    "x = compute(y);",
    "config->verbose = true;",
    "/* helper */",
    "for (i = 0; i < n; i++) {",
    "name = get_name(user);",
    "render(widget);",
)
CONTEXT_LINES = ("{", "}", "", "int rc;", "struct item *it;", "static int count;")
PATHS = (
    "src/net/socket.c", "lib/parse.c", "drivers/usb/core.c", "fs/ext4/inode.c",
    "src/util/strings.c", "tests/test_parse.c", "kernel/sched.c", "src/main.c",
)


@dataclass
class SynthData:
    labeled: List[Commit]
    unlabeled: List[Commit]
    # ground truth of the unlabeled commits, never written to their records
    hidden_labels: Dict[str, int] = field(default_factory=dict)


def _message(rng: LCG64, security: bool) -> str:
    pool = SECURITY_WORDS if security else NEUTRAL_WORDS
    words = [rng.choice(SHARED_WORDS)]
    words += [rng.choice(pool) for _ in range(2 + rng.randbelow(2))]
    words[0] = words[0].capitalize()
    return " ".join(words)


def _hunk(rng: LCG64, security: bool, start: int) -> List[str]:
    n_added = 1 + rng.randbelow(5)
    n_removed = rng.randbelow(4)
    body = []
    for _ in range(n_removed):
        pool = SECURITY_REMOVED if security and rng.randbelow(2) else NEUTRAL_LINES
        body.append("-" + rng.choice(pool))
    for i in range(n_added):
        # security hunks always add at least one sensitive line
        pool = SECURITY_ADDED if security and (i == 0 or rng.randbelow(2)) else NEUTRAL_LINES
        body.append("+" + rng.choice(pool))
    before = [" " + rng.choice(CONTEXT_LINES) for _ in range(3)]
    after = [" " + rng.choice(CONTEXT_LINES) for _ in range(3)]
    old_len = 6 + n_removed
    new_len = 6 + n_added
    header = f"@@ -{start},{old_len} +{start},{new_len} @@"
    return [header] + before + body + after


def _diff(rng: LCG64, security: bool) -> str:
    lines = []
    for path in rng_sample(rng, PATHS, 1 + rng.randbelow(2)):
        lines += [
            f"diff --git a/{path} b/{path}",
            f"--- a/{path}",
            f"+++ b/{path}",
        ]
        start = 1 + rng.randbelow(200)
        for _ in range(1 + rng.randbelow(2)):
            lines += _hunk(rng, security, start)
            start += 40
    return "\n".join(lines) + "\n"


def rng_sample(rng: LCG64, items, k):
    return [items[i] for i in sorted(rng.sample_indices(len(items), k))]


def generate(n_labeled: int, n_unlabeled: int, noise: float = 0.0, seed: int = 0,
             pos_rate: float = 0.3, prefix: str = "c") -> SynthData:
    """Generate ``n_labeled`` labeled and ``n_unlabeled`` unlabeled commits.

    The labeled block is exactly balanced (one extra positive for odd sizes)
    so both classes are always present; unlabeled commits are security
    patches with probability ``pos_rate``.
    """
    if n_labeled < 4:
        raise ValueError("n_labeled must be >= 4")
    if n_unlabeled < 0:
        raise ValueError("n_unlabeled must be >= 0")
    if not 0 <= noise < 0.5:
        raise ValueError("noise must lie in [0, 0.5)")
    rng = LCG64(seed)
    classes = [int(i < (n_labeled + 1) // 2) for i in range(n_labeled)]
    rng.shuffle(classes)
    classes += [int(rng.random() < pos_rate) for _ in range(n_unlabeled)]

    width = len(str(n_labeled + n_unlabeled - 1))
    data = SynthData([], [])
    for i, label in enumerate(classes):
        security = bool(label)
        text_security = (not security) if rng.random() < noise else security
        commit = Commit(
            id=f"{prefix}{i:0{width}d}",
            message=_message(rng, text_security),
            diff=_diff(rng, security),
        )
        if i < n_labeled:
            data.labeled.append(Commit(commit.id, commit.message, commit.diff, label))
        else:
            data.unlabeled.append(commit)
            data.hidden_labels[commit.id] = label
    return data

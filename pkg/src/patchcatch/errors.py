"""Exception hierarchy shared by all patchcatch modules."""


class PatchCatchError(Exception):
    """Base class for every error raised by this package."""


class MalformedHunkHeader(PatchCatchError):
    """An ``@@`` line that does not follow ``@@ -a[,b] +c[,d] @@``."""

    def __init__(self, lineno, line):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: malformed hunk header {line!r}")


class SchemaError(PatchCatchError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class ToolNotFound(PatchCatchError):
    pass


class SubprocessFailure(PatchCatchError):
    def __init__(self, cmd, returncode, stderr):
        self.cmd = cmd
        self.returncode = returncode
        self.stderr = stderr
        super().__init__(
            f"{' '.join(cmd)} exited with {returncode}: {stderr.strip()}"
        )


class EmptyVocabulary(PatchCatchError):
    pass


class EmptyInput(PatchCatchError):
    pass


class DimensionMismatch(PatchCatchError):
    pass


class SingleClassInput(PatchCatchError):
    pass


class SingleClassLabeledInput(SingleClassInput):
    pass


class IndexOutOfVocabulary(PatchCatchError):
    pass


class NonFiniteLoss(PatchCatchError):
    pass


class ConfigInvalid(PatchCatchError):
    pass


class EmptyMatrix(PatchCatchError):
    pass


class TooFewExamples(PatchCatchError):
    pass


class FormatError(PatchCatchError):
    pass


class ChecksumError(FormatError):
    pass


class VersionError(FormatError):
    def __init__(self, found, supported):
        self.found = found
        self.supported = supported
        super().__init__(
            f"model format version {found} is not supported "
            f"(this reader supports version {supported})"
        )

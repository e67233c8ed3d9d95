class DialRankError(Exception):
    """
    Base class of all errors raised by dialrank.
    """


class DataError(DialRankError):
    """
    Input data is missing, malformed or unsuitable for the requested operation.
    """


class CorpusFormatError(DataError):
    """
    A transcript, dataset or tuple file could not be parsed.
    """
    def __init__(self, message: str, line_no: int = None, path=None):
        """
        Init the error.
        :param message: What went wrong.
        :param line_no: 1-based line number in the offending file, if known.
        :param path: The offending file, if known.
        """
        self.line_no = line_no
        self.path = path
        where = ''
        if path is not None:
            where += '{}'.format(path)
        if line_no is not None:
            where += ':{}'.format(line_no) if where else 'line {}'.format(line_no)
        super().__init__('{}: {}'.format(where, message) if where else message)


class DuplicateDialogueError(DataError):
    def __init__(self, dialogue_id: str, line_no: int = None):
        self.dialogue_id = dialogue_id
        self.line_no = line_no
        super().__init__('duplicate dialogue id {!r} (line {})'.format(dialogue_id, line_no))


class EmptyCorpusError(DataError):
    pass


class DegenerateCorpusError(DataError):
    pass


class InsufficientDataError(DataError):
    """
    Not enough eligible material to produce what was asked for. `achievable` is the largest request that
    would have succeeded.
    """
    def __init__(self, message: str, achievable: int = 0):
        self.achievable = achievable
        super().__init__(message)


class FeedbackSetError(DataError):
    pass


class UndefinedCorrelationError(DataError):
    pass


class ModelError(DialRankError):
    pass


class ShapeError(ModelError):
    pass


class UnknownBotError(ModelError):
    def __init__(self, bot: str):
        self.bot = bot
        super().__init__('unknown bot {!r}'.format(bot))


class UntrainedModelError(ModelError):
    pass


class NonFiniteError(ModelError):
    """
    A loss or gradient became NaN or infinite. `name` is the parameter (or 'loss') where it was detected.
    """
    def __init__(self, name: str, detail: str = ''):
        self.name = name
        super().__init__('non-finite value in {}{}'.format(name, ': ' + detail if detail else ''))


class VocabularyError(ModelError):
    pass


class CheckpointError(DialRankError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ConfigError(DialRankError):
    pass

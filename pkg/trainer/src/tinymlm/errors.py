"""Trainer error types."""


class TrainerError(Exception):
    pass


class EmptyDataset(TrainerError):
    def __init__(self, path):
        super().__init__(f"dataset {path} is missing or has no documents")


class EmptyHeldout(TrainerError):
    pass


class VocabOverflow(TrainerError):
    def __init__(self, actual: int, budget: int):
        self.actual = actual
        self.budget = budget
        super().__init__(
            f"trained vocabulary has {actual} entries, over the requested "
            f"budget of {budget}; the byte alphabet and special tokens are "
            f"always included, so the budget cannot go below them"
        )


class SpecMismatch(TrainerError):
    pass

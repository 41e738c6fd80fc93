class TwinError(Exception):
    """Base class for every error the toolkit reports as a data/model failure."""


class DataError(TwinError):
    pass


class SchemaError(DataError):
    pass


class ModelError(TwinError):
    pass


class ModelFileError(ModelError):
    pass


class ShapeError(ModelError):
    pass


class TrainingDivergedError(ModelError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class RetrievalError(TwinError):
    pass


class ExplanationError(TwinError):
    pass


class AugmentationError(TwinError):
    pass

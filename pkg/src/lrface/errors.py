"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented contract (bad file, shape, manifest...)."""


class StageError(RuntimeError):
    """A pipeline stage failed for one image."""

    def __init__(self, image_id, stage, cause):
        self.image_id = image_id
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage} failed for {image_id}: {cause}")

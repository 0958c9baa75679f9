# errors.py


class LookalikeError(Exception):
    """Base for every error a pipeline module raises on purpose."""

    def __init__(self, message="", ext_id=None):
        super().__init__(message)
        self.ext_id = ext_id

    @property
    def name(self):
        return type(self).__name__

    def describe(self):
        text = f"{self.name}: {self}"
        if self.ext_id:
            text += f" [id={self.ext_id}]"
        return text

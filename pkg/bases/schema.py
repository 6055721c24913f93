from pydantic import BaseModel, ConfigDict


class BaseSchema(BaseModel):
    """
    Base class for every validated configuration and result schema.

    Schemas are immutable, reject unknown fields and refuse non-finite floats.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

class GatewayError(RuntimeError):
    """Base class for failures raised while talking to an agent backend."""


class BackendExhausted(GatewayError):
    def __init__(self, attempts: int, last_error: str):
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


class ScriptUnderflow(GatewayError):
    def __init__(self, agent_id: str, served: int):
        super().__init__(f"script for agent {agent_id!r} exhausted after {served} replies")
        self.agent_id = agent_id


class AuthMissing(GatewayError):
    def __init__(self, env_var: str):
        super().__init__(f"no credential configured: set the {env_var} environment variable")
        self.env_var = env_var


class ReplayMiss(GatewayError):
    def __init__(self, agent_id: str, key: str):
        super().__init__(f"no recorded reply for agent {agent_id!r} (conversation {key[:12]})")
        self.agent_id = agent_id
        self.key = key


class StorageFailure(GatewayError):
    pass


class BudgetExceeded(GatewayError):
    def __init__(self, limit: int):
        super().__init__(f"call budget of {limit} backend calls exceeded")
        self.limit = limit


class MissingBinding(KeyError):
    def __init__(self, placeholder: str):
        super().__init__(placeholder)
        self.placeholder = placeholder

    def __str__(self):
        return f"no binding for placeholder {{{self.placeholder}}}"

"""
NocPerf - 异常定义
每个异常携带CLI退出码
"""


class NocPerfError(Exception):
    """nocperf异常基类"""

    exit_code: int = 1


class ConfigError(NocPerfError):
    """配置文件或命令行参数错误"""

    exit_code = 2


class DomainError(NocPerfError, ValueError):
    """参数超出公式定义域"""

    exit_code = 2


class TraceParseError(ConfigError):
    """trace文件解析错误 (带行号)"""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        location = ""
        if path is not None:
            location = f"{path}:"
        if line is not None:
            location = f"{location}{line}: "
        elif location:
            location = f"{location} "
        super().__init__(f"{location}{message}")


class InstabilityError(NocPerfError):
    """队列或服务器负载 >= 1"""

    exit_code = 3

    def __init__(self, queue: str, utilization: float, message: str | None = None):
        self.queue = str(queue)
        self.utilization = utilization
        super().__init__(
            message or f"queue {self.queue} is unstable (utilization {utilization:.4f} >= 1)"
        )


class ModelBreakdownError(NocPerfError):
    """分解模型失效 (严格模式下 p_m(0) <= 0)"""

    exit_code = 3


class NonConvergenceError(NocPerfError):
    """不动点迭代未收敛"""

    exit_code = 4

    def __init__(
        self,
        message: str,
        iterations: int,
        residual: float,
        queue: str | None = None,
        last_iterate: object = None,
    ):
        self.iterations = iterations
        self.residual = residual
        self.queue = queue
        self.last_iterate = last_iterate
        detail = f"{message} after {iterations} iterations (residual {residual:.3e}"
        if queue is not None:
            detail += f", worst queue {queue}"
        super().__init__(detail + ")")


class UnclassifiableStructureError(NocPerfError):
    """队列图中出现无法归类的结构 (视为程序缺陷)"""

    exit_code = 1

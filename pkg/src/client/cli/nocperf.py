"""
NocPerf CLI - 命令行工具
"""
from contextlib import contextmanager
from functools import partial
from pathlib import Path
from typing import Any, Iterable
import csv
import json
import time

import typer
from rich.console import Console
from rich.progress import Progress
from rich.table import Table

from src.core.config import load_config, resolve_log_level, resolved_config, setup_logging
from src.core.errors import ConfigError, NocPerfError
from src.core.models import ExperimentConfig, OutputFormat, SimReport
from src.core.scheduler import Scheduler
from src.simulator.engine import SimConfig, run_simulation
from src.topologies.registry import create_topology, registry
from src.traceburst.estimator import estimate_burstiness, estimate_window_latency
from src.traceburst.trace import load_trace

from .experiments import (
    ExperimentPoint,
    analyze_point,
    compare_point,
    config_flows,
    experiment_points,
    sweep_point,
)

app = typer.Typer(help="NocPerf 片上网络延迟建模命令行工具")
console = Console()

BASELINE_NO_BURST = "no-burst"
CONFIG_FILE = "resolved_config.json"


# ============ 公共 ============

@contextmanager
def _errors():
    """NocPerfError -> 红色提示 + 对应退出码"""
    try:
        yield
    except NocPerfError as e:
        console.print(f"[red]{e}[/red]")
        raise typer.Exit(e.exit_code)


def _prepare(config_path: Path | None, log_level: str | None, seed: int | None = None) -> ExperimentConfig:
    config = load_config(config_path) if config_path else ExperimentConfig()
    setup_logging(resolve_log_level(log_level, config))
    if seed is not None:
        config = config.model_copy(
            update={"simulation": config.simulation.model_copy(update={"seed": seed})}
        )
    return config


def _write_json(path: Path, data: Any):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write("\n")


def _write_csv(path: Path, rows: Iterable[dict]):
    rows = list(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _write_config(out: Path, config: ExperimentConfig):
    _write_json(out / CONFIG_FILE, resolved_config(config))


def _fmt(value: float | None, digits: int = 3) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _point(config: ExperimentConfig) -> ExperimentPoint:
    return ExperimentPoint(config, config.traffic.burst_prob, config.traffic.injection_rate)


def _run_points(func, points: list, jobs: int | None, description: str) -> list:
    scheduler = Scheduler(jobs)
    with Progress(console=console, transient=True) as progress:
        task = progress.add_task(description, total=len(points))
        return scheduler.run(func, points, on_done=lambda i, r: progress.advance(task))


# ============ 解析 ============

@app.command()
def analyze(
    config_path: Path = typer.Option(None, "-c", "--config", help="实验配置 (YAML/JSON)"),
    out: Path = typer.Option(Path("results"), "-o", "--out", help="输出目录"),
    baseline: str = typer.Option(None, "--baseline", help="附加基线 (no-burst)"),
    seed: int = typer.Option(None, "--seed", help="随机种子 (覆盖配置)"),
    fmt: OutputFormat = typer.Option(OutputFormat.CSV, "--format", help="输出格式"),
    jobs: int = typer.Option(None, "-j", "--jobs", help="并行进程数 (默认物理核数)"),
    log_level: str = typer.Option(None, "--log-level", help="日志级别"),
):
    """解析模型求每条流/每个队列的延迟"""
    with _errors():
        config = _prepare(config_path, log_level, seed)
        # 单个解析点在当前进程求解, 只校验 --jobs
        Scheduler(jobs)
        if baseline is not None and baseline != BASELINE_NO_BURST:
            raise ConfigError(f"unknown baseline '{baseline}' (only '{BASELINE_NO_BURST}')")

        point = _point(config)
        started = time.perf_counter()
        solution = analyze_point(point)
        base = analyze_point(point, baseline=True) if baseline else None
        elapsed = time.perf_counter() - started

    if fmt == OutputFormat.JSON:
        data = {"solution": solution.model_dump(mode="json")}
        if base is not None:
            data["baseline"] = base.model_dump(mode="json")
        _write_json(out / "analyze.json", data)
    else:
        flow_rows = []
        for index, flow in enumerate(solution.flows):
            row = flow.model_dump(mode="json")
            if base is not None:
                row["baseline_latency"] = base.flows[index].latency
            flow_rows.append(row)
        _write_csv(out / "analyze_flows.csv", flow_rows)
        _write_csv(out / "analyze_queues.csv", (q.model_dump(mode="json") for q in solution.queues))
    _write_config(out, config)

    table = Table(title=f"解析延迟 ({create_topology(config.topology).label})")
    table.add_column("流", style="cyan")
    table.add_column("跳数")
    table.add_column("λ")
    table.add_column("延迟", style="green")
    table.add_column("零负载")
    if base is not None:
        table.add_column("无突发基线", style="yellow")
    for index, flow in enumerate(solution.flows[:20]):
        cells = [
            f"{flow.source}->{flow.destination}", str(flow.hops), _fmt(flow.rate, 4),
            _fmt(flow.latency), _fmt(flow.zero_load, 1),
        ]
        if base is not None:
            cells.append(_fmt(base.flows[index].latency))
        table.add_row(*cells)
    console.print(table)
    if len(solution.flows) > 20:
        console.print(f"... 共 {len(solution.flows)} 条流")
    console.print(
        f"平均延迟: {_fmt(solution.mean_latency)} cycles, "
        f"迭代 {solution.iterations} 次, 耗时 {elapsed * 1000:.1f} ms"
    )
    console.print(f"[green]✓[/green] 结果已写入 {out}")


# ============ 仿真 ============

def _sim_flow_rows(report: SimReport) -> list[dict]:
    rows = []
    for flow in report.flows:
        row = flow.model_dump(mode="json", exclude={"percentiles"})
        row.update(flow.percentiles)
        rows.append(row)
    return rows


@app.command()
def simulate(
    config_path: Path = typer.Option(None, "-c", "--config", help="实验配置 (YAML/JSON)"),
    out: Path = typer.Option(Path("results"), "-o", "--out", help="输出目录"),
    seed: int = typer.Option(None, "--seed", help="随机种子 (覆盖配置)"),
    trace: Path = typer.Option(None, "--trace", help="导出注入轨迹"),
    fmt: OutputFormat = typer.Option(OutputFormat.CSV, "--format", help="输出格式"),
    log_level: str = typer.Option(None, "--log-level", help="日志级别"),
):
    """周期精确仿真"""
    with _errors():
        config = _prepare(config_path, log_level, seed)
        topology = create_topology(config.topology)
        simulation = config.simulation
        sim_config = SimConfig(
            topology=topology,
            flows=config_flows(config, topology, config.traffic.injection_rate, config.traffic.burst_prob),
            routing=config.routing,
            service_time=config.service.service_time,
            service_scv=config.service.service_scv,
            link_latency=config.service.link_latency,
            arbitration=config.arbitration,
            warmup=simulation.warmup,
            measure=simulation.measure,
            seed=simulation.seed,
            percentiles=tuple(simulation.percentiles),
            trace_path=trace,
        )
        started = time.perf_counter()
        report = run_simulation(sim_config)
        elapsed = time.perf_counter() - started

    if fmt == OutputFormat.JSON:
        _write_json(out / "simulate.json", report.model_dump(mode="json"))
    else:
        _write_csv(out / "simulate_flows.csv", _sim_flow_rows(report))
        _write_csv(out / "simulate_queues.csv", (q.model_dump(mode="json") for q in report.queues))
    _write_config(out, config)

    if report.saturated:
        console.print("[yellow]警告: 存在负载 >= 1 的队列, 结果为饱和状态[/yellow]")
    console.print(
        f"注入 {report.injected}, 送达 {report.delivered}, 在途 {report.in_flight}; "
        f"平均延迟 {_fmt(report.mean_latency)} cycles, 耗时 {elapsed:.1f} s"
    )
    console.print(f"[green]✓[/green] 结果已写入 {out}")


# ============ 对比与扫描 ============

@app.command()
def compare(
    config_path: Path = typer.Option(None, "-c", "--config", help="实验配置 (YAML/JSON)"),
    out: Path = typer.Option(Path("results"), "-o", "--out", help="输出目录"),
    seed: int = typer.Option(None, "--seed", help="随机种子 (覆盖配置)"),
    table_grid: bool = typer.Option(False, "--table", help="使用该拓扑内置的误差表网格"),
    jobs: int = typer.Option(None, "-j", "--jobs", help="并行进程数 (默认物理核数)"),
    fmt: OutputFormat = typer.Option(OutputFormat.CSV, "--format", help="输出格式"),
    log_level: str = typer.Option(None, "--log-level", help="日志级别"),
):
    """解析模型 vs 无突发基线 vs 仿真"""
    with _errors():
        config = _prepare(config_path, log_level, seed)
        points = experiment_points(config, table=table_grid)
        rows = _run_points(compare_point, points, jobs, "对比中...")

    data = [row.model_dump(mode="json") for row in rows]
    if fmt == OutputFormat.JSON:
        _write_json(out / "compare.json", data)
    else:
        _write_csv(out / "compare.csv", data)
    _write_config(out, config)

    table = Table(title="解析模型 vs 仿真")
    table.add_column("拓扑", style="cyan")
    table.add_column("p_b")
    table.add_column("λ")
    table.add_column("解析", style="green")
    table.add_column("仿真")
    table.add_column("误差%")
    table.add_column("基线", style="yellow")
    table.add_column("基线误差%")
    table.add_column("状态")
    for row in rows:
        table.add_row(
            row.topology, f"{row.burst_prob:g}", f"{row.injection_rate:g}",
            _fmt(row.analytic), _fmt(row.simulated), _fmt(row.error_pct, 1),
            _fmt(row.baseline), _fmt(row.baseline_error_pct, 1), str(row.status),
        )
    console.print(table)
    console.print(f"[green]✓[/green] 结果已写入 {out}")


@app.command()
def sweep(
    config_path: Path = typer.Option(None, "-c", "--config", help="实验配置 (YAML/JSON)"),
    out: Path = typer.Option(Path("results"), "-o", "--out", help="输出目录"),
    seed: int = typer.Option(None, "--seed", help="随机种子 (覆盖配置)"),
    simulate: bool = typer.Option(True, "--simulate/--no-simulate", help="是否包含仿真曲线"),
    jobs: int = typer.Option(None, "-j", "--jobs", help="并行进程数 (默认物理核数)"),
    fmt: OutputFormat = typer.Option(OutputFormat.CSV, "--format", help="输出格式"),
    log_level: str = typer.Option(None, "--log-level", help="日志级别"),
):
    """延迟-注入率曲线 (长格式数据)"""
    with _errors():
        config = _prepare(config_path, log_level, seed)
        points = experiment_points(config)
        results = _run_points(partial(sweep_point, simulate=simulate), points, jobs, "扫描中...")

    data = [row.model_dump(mode="json") for rows in results for row in rows]
    if fmt == OutputFormat.JSON:
        _write_json(out / "sweep.json", data)
    else:
        _write_csv(out / "sweep.csv", data)
    _write_config(out, config)
    console.print(f"{len(points)} 个点, {len(data)} 行")
    console.print(f"[green]✓[/green] 结果已写入 {out}")


# ============ 突发估计 ============

@app.command("estimate-burst")
def estimate_burst(
    trace: Path = typer.Argument(..., help="注入轨迹 (cycle,src,dst)"),
    config_path: Path = typer.Option(None, "-c", "--config", help="实验配置, 提供时按窗口求解延迟"),
    out: Path = typer.Option(Path("results"), "-o", "--out", help="输出目录"),
    window: int = typer.Option(None, "--window", help="窗口长度 (cycles)"),
    service_time: int = typer.Option(None, "--service-time", help="虚拟队列服务时间"),
    per_flow: bool = typer.Option(False, "--per-flow", help="按流而不是按源估计"),
    seed: int = typer.Option(None, "--seed", help="随机种子 (覆盖配置)"),
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", help="输出格式"),
    jobs: int = typer.Option(None, "-j", "--jobs", help="并行进程数 (默认物理核数)"),
    log_level: str = typer.Option(None, "--log-level", help="日志级别"),
):
    """按时间窗估计注入率与突发概率"""
    with _errors():
        config = _prepare(config_path, log_level, seed)
        Scheduler(jobs)
        window_len = window if window is not None else config.estimation.window
        service = service_time if service_time is not None else config.service.service_time
        by_flow = per_flow or config.estimation.per_flow

        events = load_trace(trace)
        estimates = estimate_burstiness(events, service, window_len, per_flow=by_flow)
        latencies = None
        if config_path is not None:
            latencies = estimate_window_latency(
                events,
                create_topology(config.topology),
                window_len=window_len,
                service_time=service,
                link_latency=config.service.link_latency,
                routing=config.routing,
                arbitration=config.arbitration,
                per_flow=by_flow,
                settings=config.solver,
            )

    data = [e.model_dump(mode="json") for e in estimates]
    if fmt == OutputFormat.JSON:
        _write_json(out / "burst_estimates.json", data)
    else:
        _write_csv(out / "burst_estimates.csv", data)
    if latencies is not None:
        latency_data = [w.model_dump(mode="json") for w in latencies]
        if fmt == OutputFormat.JSON:
            _write_json(out / "window_latency.json", latency_data)
        else:
            _write_csv(out / "window_latency.csv", latency_data)
        _write_config(out, config)

    table = Table(title=f"突发估计 ({len(events)} 个事件)")
    table.add_column("窗口")
    table.add_column("源", style="cyan")
    table.add_column("λ")
    table.add_column("p_b", style="green")
    table.add_column("标记")
    for e in estimates[:30]:
        key = str(e.source) if e.destination is None else f"{e.source}->{e.destination}"
        table.add_row(str(e.window), key, _fmt(e.rate, 4), _fmt(e.burst_prob), str(e.flag))
    console.print(table)
    console.print(f"[green]✓[/green] 结果已写入 {out}")


# ============ 拓扑 ============

@app.command()
def topologies():
    """列出可用拓扑"""
    table = Table(title="拓扑")
    table.add_column("名称", style="cyan")
    table.add_column("显示名称")
    table.add_column("路由")
    table.add_column("参数")
    table.add_column("描述")
    for info in registry.list_topologies():
        table.add_row(
            info["name"],
            info["display_name"],
            ", ".join(info["routings"]),
            ", ".join(info["parameters"]),
            info["description"],
        )
    console.print(table)


def main():
    app()


if __name__ == "__main__":
    main()

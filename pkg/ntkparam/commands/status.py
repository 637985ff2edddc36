from __future__ import annotations

from ntkparam import __version__
from ntkparam.commands import CommandContext, register
from ntkparam.utils import format_duration


@register("status", "Summarise the run journal", "ntkparam status [--out DIR]", needs_config=False)
async def cmd_status(ctx: CommandContext) -> str:
    stats = await ctx.journal.get_stats()
    runs = await ctx.journal.get_runs(limit=5)

    lines = [
        f"ntkparam {__version__}",
        "",
        "Journal",
        f"  Runs: {stats.runs} ({stats.succeeded} ok, {stats.failed} failed)",
        f"  Steps: {stats.steps}",
        f"  Total wall time: {format_duration(stats.wall_seconds)}",
    ]
    if runs:
        lines += ["", "Recent runs"]
        for run_id, command, config_hash, version, status, seconds in runs:
            took = format_duration(seconds) if seconds is not None else "-"
            lines.append(
                f"  #{run_id} {command} [{status}] {took} config {config_hash[:12]} v{version}"
            )
        last_id = runs[0][0]
        steps = await ctx.journal.get_steps(last_id)
        if steps:
            lines += ["", f"Steps of run #{last_id}"]
            for step, seconds, detail in steps:
                suffix = f" {detail}" if detail else ""
                lines.append(f"  {step}{suffix}: {format_duration(seconds)}")
    return "\n".join(lines)

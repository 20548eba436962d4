"""Pod to Slurm batch script translation.

A pod becomes one batch job. The script starts a parent container that owns
the pod IP, runs each pod container as a child inside the parent's network
namespace, and records per-container exit codes in a status file next to
the container logs.
"""

from __future__ import annotations

import math
import re
import shlex
from dataclasses import dataclass, field

from .errors import BadAnnotationSyntax, UnallocatedIP
from .model import ContainerSpec, Pod
from .quantity import CPU, MEMORY

FLAGS_ANNOTATION = "slurm-job.hpk.io/flags"
MPI_FLAGS_ANNOTATION = "slurm-job.hpk.io/mpi-flags"

PARENT_IMAGE = "docker://registry.k8s.io/pause:3.9"
STATE_ROOT = ".hpk"
MAX_JOB_NAME = 128
MIB = 2**20

# short spellings normalized before last-wins resolution
FLAG_ALIASES = {
    "-J": "--job-name",
    "-n": "--ntasks",
    "-c": "--cpus-per-task",
    "-t": "--time",
    "-o": "--output",
    "-e": "--error",
}

Directive = tuple[str, "str | None"]

_JOB_NAME_RE = re.compile(r"[^A-Za-z0-9._-]")


def job_name(pod: Pod) -> str:
    return _JOB_NAME_RE.sub("-", f"{pod.meta.namespace}.{pod.meta.name}")[:MAX_JOB_NAME]


def tokenize(text: str) -> list[str]:
    """Split on whitespace; double quotes group and are removed."""
    tokens: list[str] = []
    buf: list[str] = []
    in_token = in_quote = False
    for ch in text:
        if ch == '"':
            in_quote = not in_quote
            in_token = True
        elif ch.isspace() and not in_quote:
            if in_token:
                tokens.append("".join(buf))
                buf.clear()
                in_token = False
        else:
            buf.append(ch)
            in_token = True
    if in_quote:
        raise BadAnnotationSyntax(f"unbalanced double quote in {text!r}")
    if in_token:
        tokens.append("".join(buf))
    return tokens


@dataclass(frozen=True)
class PassThroughFlags:
    flags: tuple[str, ...] = ()
    mpi_flags: tuple[str, ...] = ()


def annotations_to_flags(pod: Pod) -> PassThroughFlags:
    ann = pod.meta.annotations
    return PassThroughFlags(
        flags=tuple(tokenize(ann.get(FLAGS_ANNOTATION, ""))),
        mpi_flags=tuple(tokenize(ann.get(MPI_FLAGS_ANNOTATION, ""))),
    )


def group_flags(tokens: tuple[str, ...] | list[str]) -> list[Directive]:
    """Pair flag tokens with their values (``--a=b``, ``-N 2`` or bare ``--x``)."""
    out: list[Directive] = []
    for tok in tokens:
        if tok.startswith("-"):
            if tok.startswith("--") and "=" in tok:
                flag, value = tok.split("=", 1)
                out.append((flag, value))
            else:
                out.append((tok, None))
        elif out and out[-1][1] is None and out[-1][0].startswith("-"):
            out[-1] = (out[-1][0], tok)
        else:
            out.append((tok, None))
    return out


def render_directive(flag: str, value: str | None) -> str:
    if value is None:
        return f"#SBATCH {flag}"
    if any(ch.isspace() for ch in value):
        value = f'"{value}"'
    if flag.startswith("--"):
        return f"#SBATCH {flag}={value}"
    return f"#SBATCH {flag} {value}"


def pod_dir(pod: Pod) -> str:
    return f"{STATE_ROOT}/{pod.meta.namespace}/{pod.meta.name}"


def resources_to_directives(pod: Pod) -> list[Directive]:
    """Aggregate container requests into the generated job directives.

    Requests are summed over containers and rounded up; limits are ignored.
    """
    millicores = sum(c.requests[CPU].value for c in pod.containers if CPU in c.requests)
    mem_bytes = [c.requests[MEMORY].value for c in pod.containers if MEMORY in c.requests]
    out: list[Directive] = [
        ("--ntasks", "1"),
        ("--cpus-per-task", str(max(1, math.ceil(millicores / 1000)))),
    ]
    if mem_bytes:
        out.append(("--mem", f"{max(1, math.ceil(sum(mem_bytes) / MIB))}M"))
    if pod.active_deadline_seconds is not None:
        out.append(("--time", str(math.ceil(pod.active_deadline_seconds / 60))))
    return out


def generated_directives(pod: Pod) -> list[Directive]:
    d = pod_dir(pod)
    return [
        ("--job-name", job_name(pod)),
        *resources_to_directives(pod),
        ("--output", f"{d}/slurm.out"),
        ("--error", f"{d}/slurm.err"),
    ]


@dataclass
class BatchScript:
    job_name: str
    directives: list[Directive]
    passthrough: list[Directive] = field(default_factory=list)
    prologue: list[str] = field(default_factory=list)
    container_commands: list[str] = field(default_factory=list)
    epilogue: list[str] = field(default_factory=list)

    def effective(self) -> dict[str, str | None]:
        """Directive values after pass-through flags override generated ones."""
        out: dict[str, str | None] = {}
        for flag, value in [*self.directives, *self.passthrough]:
            out[FLAG_ALIASES.get(flag, flag)] = value
        return out

    def header(self) -> list[str]:
        lines = [render_directive(f, v) for f, v in self.directives]
        generated = {f: v for f, v in self.directives}
        for flag, value in self.passthrough:
            lines.append(render_directive(flag, value))
            name = FLAG_ALIASES.get(flag, flag)
            if name in generated:
                given = render_directive(flag, value)[len("#SBATCH "):]
                lines.append(
                    f"# hpk: pass-through {given} overrides generated "
                    f"{name}={generated[name]} (last value wins)"
                )
        return lines

    def render(self) -> str:
        lines = ["#!/bin/bash", *self.header(), ""]
        lines += self.prologue
        lines += self.container_commands
        lines += self.epilogue
        return "\n".join(lines) + "\n"


def _image_ref(image: str) -> str:
    return image if "://" in image else f"docker://{image}"


def _child_command(pod: Pod, index: int, c: ContainerSpec, mpi_flags: tuple[str, ...]) -> str:
    volumes = {v.name: v.host_path for v in pod.volumes}
    argv: list[str] = []
    if mpi_flags:
        argv += ["mpiexec", *mpi_flags]
    argv += ["apptainer", "exec" if c.command else "run", "--fakeroot"]
    parts = [shlex.join(argv), "--netns-path=/proc/$PARENT_PID/ns/net"]
    for m in c.volume_mounts:
        bind = f"{volumes[m.name]}:{m.mount_path}" + (":ro" if m.read_only else "")
        parts.append(shlex.join(["--bind", bind]))
    parts.append(shlex.join([_image_ref(c.image), *c.command, *c.args]))
    parts.append(f'> "$POD_DIR/{c.name}.out" 2> "$POD_DIR/{c.name}.err" & CHILD_{index}=$!')
    return " ".join(parts)


def build_script(pod: Pod, pod_ip: str | None) -> BatchScript:
    if not pod_ip:
        raise UnallocatedIP(f"pod {pod.meta.namespace}/{pod.meta.name} has no IP")
    flags = annotations_to_flags(pod)
    name = job_name(pod)
    prologue = [
        "# hpk: parent container holds the pod IP; all containers run as fakeroot",
        f"POD_DIR={shlex.quote(pod_dir(pod))}",
        'mkdir -p "$POD_DIR"',
        ': > "$POD_DIR/exit-codes"',
        shlex.join([
            "apptainer", "instance", "start", "--fakeroot", "--net", "--network=flannel",
            f"--network-args=IP={pod_ip}", PARENT_IMAGE, name,
        ]),
        "PARENT_PID=$(apptainer instance list --json "
        + shlex.quote(name)
        + " | sed -n 's/.*\"pid\": *\\([0-9]*\\).*/\\1/p')",
    ]
    commands = [
        _child_command(pod, i, c, flags.mpi_flags) for i, c in enumerate(pod.containers)
    ]
    epilogue = ["STATUS=0"]
    for i, c in enumerate(pod.containers):
        epilogue.append(
            f'wait $CHILD_{i}; RC=$?; echo "{c.name} $RC" >> "$POD_DIR/exit-codes"; '
            '[ "$RC" -eq 0 ] || STATUS=$RC'
        )
    epilogue += [shlex.join(["apptainer", "instance", "stop", name]), "exit $STATUS"]
    return BatchScript(
        job_name=name,
        directives=generated_directives(pod),
        passthrough=group_flags(flags.flags),
        prologue=prologue,
        container_commands=commands,
        epilogue=epilogue,
    )


def render_script(pod: Pod, pod_ip: str | None) -> str:
    return build_script(pod, pod_ip).render()

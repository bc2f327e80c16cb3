"""Progress printing shared by the library, the CLI and the pipeline scripts."""

from abrf import config

_state = {"verbose": config.VERBOSE}


def set_verbose(flag):
    _state["verbose"] = bool(flag)


def is_verbose():
    return _state["verbose"]


def banner(title):
    if not _state["verbose"]:
        return
    print("=" * 80)
    print(title)
    print("=" * 80)


def say(message):
    if _state["verbose"]:
        print(message)


def warn(message):
    if _state["verbose"]:
        print(f"⚠️  {message}")


def fail(message):
    if _state["verbose"]:
        print(f"❌ {message}")

# Subject-code execution driver.
#
# Reads one JSON request on stdin, executes subject Python code in fresh
# namespaces, and writes one JSON response on stdout. Runs under `python3
# -I -E -S`, so only the standard library is importable. Each function call
# is guarded by a wall-clock alarm and a recursion limit.
#
# Call statuses:
#   ok                    normal return (value rendered as a literal if possible)
#   precondition_rejected ValueError raised by the entry function's own frame
#                         (the contract template's invalid-input signal)
#   violation             AssertionError escaping the entry call
#   timeout               per-call budget exceeded
#   crash                 any other exception
import io
import json
import math
import signal
import sys
import time
import traceback

MAX_TEXT = 2000


class _BudgetExceeded(BaseException):
    pass


def _on_alarm(signum, frame):
    raise _BudgetExceeded()


def parse_value(text):
    # Texts are produced by the harness's literal renderer; nothing beyond
    # literal syntax plus inf/nan ever reaches eval here.
    return eval(text, {"__builtins__": {}}, {"inf": math.inf, "nan": math.nan})


def render_value(v, depth=0):
    if depth > 64:
        raise ValueError("nesting too deep")
    if v is None:
        return "None"
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, int):
        if not (-(2**63) <= v < 2**63):
            raise ValueError("integer out of 64-bit range")
        return repr(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(render_value(x, depth + 1) for x in v) + "]"
    if isinstance(v, tuple):
        inner = ", ".join(render_value(x, depth + 1) for x in v)
        if len(v) == 1:
            inner += ","
        return "(" + inner + ")"
    if isinstance(v, dict):
        return "{" + ", ".join(
            render_value(k, depth + 1) + ": " + render_value(x, depth + 1)
            for k, x in v.items()
        ) + "}"
    raise ValueError("not a literal value: " + type(v).__name__)


def deep_equal(a, b):
    # Structural equality with exact float comparison; NaN equals NaN so
    # the relation stays reflexive. Numeric cross-type equality (1 == 1.0,
    # True == 1) follows the language. Tuples never equal lists.
    if isinstance(a, float) and isinstance(b, float):
        return a == b or (math.isnan(a) and math.isnan(b))
    if isinstance(a, (list, tuple)):
        if type(a) is not type(b) or len(a) != len(b):
            return False
        return all(deep_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        if not isinstance(b, dict) or len(a) != len(b):
            return False
        for k, va in a.items():
            if k not in b:
                return False
            if not deep_equal(va, b[k]):
                return False
        return True
    if isinstance(b, (list, tuple, dict)):
        return False
    try:
        return bool(a == b)
    except Exception:
        return False


def _clip(text):
    text = str(text)
    if len(text) > MAX_TEXT:
        return text[:MAX_TEXT] + "..."
    return text


def _innermost_code_name(exc):
    tb = exc.__traceback__
    name = None
    while tb is not None:
        name = tb.tb_frame.f_code.co_name
        tb = tb.tb_next
    return name


def exec_sources(sources, filename):
    ns = {"__name__": "subject"}
    for idx, src in enumerate(sources):
        code = compile(src, "%s[%d]" % (filename, idx), "exec")
        exec(code, ns)
    return ns


def guarded_call(fn, entry, arg_texts, timeout_s):
    started = time.perf_counter()
    out = {"status": "crash", "seconds": 0.0}
    signal.setitimer(signal.ITIMER_REAL, timeout_s)
    try:
        args = [parse_value(t) for t in arg_texts]
        rv = fn(*args)
        out["status"] = "ok"
        try:
            out["value"] = render_value(rv)
        except Exception:
            out["value"] = None
            out["repr"] = _clip(repr(rv))
    except _BudgetExceeded:
        out = {"status": "timeout"}
    except AssertionError as e:
        out = {"status": "violation", "message": _clip(e)}
    except ValueError as e:
        if _innermost_code_name(e) == entry:
            out = {"status": "precondition_rejected", "message": _clip(e)}
        else:
            out = {"status": "crash", "type": "ValueError", "message": _clip(e)}
    except RecursionError as e:
        out = {"status": "crash", "type": "RecursionError", "message": _clip(e)}
    except BaseException as e:
        out = {"status": "crash", "type": type(e).__name__, "message": _clip(e)}
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
    out["seconds"] = round(time.perf_counter() - started, 6)
    return out


def source_error(exc, which):
    return {
        "ok": False,
        "error": {
            "kind": "source",
            "which": which,
            "type": type(exc).__name__,
            "message": _clip(exc),
            "trace": _clip("".join(traceback.format_exc())),
        },
    }


def run_batch(req):
    try:
        ns = exec_sources(req["sources"], "<subject>")
    except BaseException as e:
        return source_error(e, "sources")
    entry = req["entry"]
    fn = ns.get(entry)
    if not callable(fn):
        return {
            "ok": False,
            "error": {"kind": "source", "which": "entry",
                      "type": "MissingEntryPoint",
                      "message": "no callable named %r" % entry},
        }
    timeout_s = float(req.get("timeout_s", 2.0))
    stop = bool(req.get("stop_on_violation", False))
    results = []
    for arg_texts in req["inputs"]:
        res = guarded_call(fn, entry, arg_texts, timeout_s)
        results.append(res)
        if stop and res["status"] == "violation":
            break
    return {"ok": True, "results": results}


def run_compare(req):
    try:
        impl_ns = exec_sources(req["impl_sources"], "<impl>")
    except BaseException as e:
        return source_error(e, "impl")
    try:
        ref_ns = exec_sources(req["ref_sources"], "<ref>")
    except BaseException as e:
        return source_error(e, "ref")
    try:
        pre_ns = exec_sources(req["pre_sources"], "<pre>")
    except BaseException as e:
        return source_error(e, "pre")

    entry = req["entry"]
    pre_entry = req["pre_entry"]
    impl_fn = impl_ns.get(entry)
    ref_fn = ref_ns.get(entry)
    pre_fn = pre_ns.get(pre_entry)
    for which, fn in (("impl", impl_fn), ("ref", ref_fn), ("pre", pre_fn)):
        if not callable(fn):
            return {
                "ok": False,
                "error": {"kind": "source", "which": which,
                          "type": "MissingEntryPoint",
                          "message": "no callable in %s namespace" % which},
            }
    timeout_s = float(req.get("timeout_s", 2.0))
    rows = []
    for arg_texts in req["inputs"]:
        row = {}
        signal.setitimer(signal.ITIMER_REAL, timeout_s)
        try:
            row["pre"] = bool(pre_fn(*[parse_value(t) for t in arg_texts]))
        except _BudgetExceeded:
            row["pre"] = None
            row["pre_status"] = "timeout"
        except BaseException as e:
            row["pre"] = None
            row["pre_status"] = "crash"
            row["pre_error"] = _clip("%s: %s" % (type(e).__name__, e))
        finally:
            signal.setitimer(signal.ITIMER_REAL, 0.0)
        impl_res = guarded_call(impl_fn, entry, arg_texts, timeout_s)
        ref_res = guarded_call(ref_fn, entry, arg_texts, timeout_s)
        row["impl"] = impl_res
        row["ref"] = ref_res
        if impl_res["status"] == "ok" and ref_res["status"] == "ok":
            # Re-run both on pristine copies of the arguments so an
            # argument-mutating implementation cannot skew the comparison,
            # then compare in-process for exact semantics.
            signal.setitimer(signal.ITIMER_REAL, 2 * timeout_s + 1.0)
            try:
                va = impl_fn(*[parse_value(t) for t in arg_texts])
                vb = ref_fn(*[parse_value(t) for t in arg_texts])
                row["equal"] = deep_equal(va, vb)
            except BaseException:
                row["equal"] = None
            finally:
                signal.setitimer(signal.ITIMER_REAL, 0.0)
        else:
            row["equal"] = None
        rows.append(row)
    return {"ok": True, "results": rows}


def run_tester_replay(req):
    # Execute search-generated tests against the contract-injected module,
    # recording the argument tuples of contract calls that raise
    # AssertionError. A stub pytest module satisfies the generated imports.
    import types

    module_name = req["module_name"]
    mod = types.ModuleType(module_name)
    mod.__dict__["__name__"] = module_name
    try:
        exec(compile(req["module_source"], module_name + ".py", "exec"),
             mod.__dict__)
    except BaseException as e:
        return source_error(e, "module")
    entry = req["entry"]
    original = getattr(mod, entry, None)
    if not callable(original):
        return {
            "ok": False,
            "error": {"kind": "source", "which": "entry",
                      "type": "MissingEntryPoint",
                      "message": "no callable named %r" % entry},
        }

    recorded = []

    def recorder(*args, **kwargs):
        try:
            return original(*args, **kwargs)
        except AssertionError:
            try:
                recorded.append([render_value(a) for a in args])
            except Exception:
                pass
            raise

    setattr(mod, entry, recorder)
    sys.modules[module_name] = mod

    if "pytest" not in sys.modules:
        pytest_stub = types.ModuleType("pytest")

        class _Raises:
            def __init__(self, expected, *a, **k):
                self.expected = expected

            def __enter__(self):
                return self

            def __exit__(self, etype, value, tb):
                return etype is not None and issubclass(etype, self.expected)

        pytest_stub.raises = _Raises
        pytest_stub.mark = types.SimpleNamespace(
            parametrize=lambda *a, **k: (lambda fn: fn))
        sys.modules["pytest"] = pytest_stub

    test_ns = {"__name__": "generated_tests"}
    try:
        exec(compile(req["test_source"], "generated_tests.py", "exec"),
             test_ns)
    except BaseException as e:
        return source_error(e, "tests")
    timeout_s = float(req.get("timeout_s", 2.0))
    for name in sorted(test_ns):
        fn = test_ns[name]
        if not name.startswith("test_") or not callable(fn):
            continue
        signal.setitimer(signal.ITIMER_REAL, 5 * timeout_s)
        try:
            fn()
        except BaseException:
            pass
        finally:
            signal.setitimer(signal.ITIMER_REAL, 0.0)
    return {"ok": True, "results": recorded}


def main():
    request = json.load(sys.stdin)
    response_out = sys.stdout
    sys.stdin = io.StringIO("")
    sys.stdout = io.StringIO()
    sys.stderr = io.StringIO()
    sys.setrecursionlimit(int(request.get("recursion_limit", 2000)))
    signal.signal(signal.SIGALRM, _on_alarm)
    mode = request.get("mode", "batch")
    if mode == "batch":
        response = run_batch(request)
    elif mode == "compare":
        response = run_compare(request)
    elif mode == "tester_replay":
        response = run_tester_replay(request)
    else:
        response = {"ok": False,
                    "error": {"kind": "protocol", "type": "BadMode",
                              "message": "unknown mode %r" % mode}}
    captured = sys.stdout.getvalue()
    if captured:
        response["subject_stdout"] = _clip(captured)
    json.dump(response, response_out)
    response_out.flush()


if __name__ == "__main__":
    main()

# runtime.py
"""Value model and conversions for the mock interpreter."""
import math
import re

import numpy as np


class JSUndefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "undefined"

    def __bool__(self):
        return False


UNDEFINED = JSUndefined()
_MISSING = object()

NAN = float("nan")
INF = float("inf")


# ---- control flow ----

class JSThrow(Exception):
    """A JavaScript exception carrying the thrown value."""

    def __init__(self, value):
        super().__init__(value)
        self.value = value


class BreakSignal(Exception):
    pass


class ContinueSignal(Exception):
    pass


class ReturnSignal(Exception):
    def __init__(self, value):
        super().__init__()
        self.value = value


class BudgetExhausted(Exception):
    """Raised when a step, loop or time budget runs out; never caught by JS code."""

    def __init__(self, reason, per_loop=False):
        super().__init__(reason)
        self.reason = reason
        self.per_loop = per_loop


# ---- objects ----

def _index(key):
    if key.isdigit() and (key == "0" or not key.startswith("0")):
        return int(key)
    return None


class JSObject:
    class_name = "Object"

    def __init__(self, proto=None, props=None):
        self.proto = proto
        self.props = dict(props) if props else {}

    def get_own(self, key):
        return self.props.get(key, _MISSING)

    def get(self, key):
        obj = self
        seen = 0
        while obj is not None and seen < 256:
            value = obj.get_own(key)
            if value is not _MISSING:
                return value
            obj = obj.proto
            seen += 1
        return UNDEFINED

    def has_property(self, key):
        obj = self
        while obj is not None:
            if obj.get_own(key) is not _MISSING:
                return True
            obj = obj.proto
        return False

    def put(self, key, value):
        self.props[key] = value

    def delete(self, key):
        self.props.pop(key, None)
        return True

    def own_keys(self):
        indexed = sorted((k for k in self.props if _index(k) is not None), key=int)
        named = [k for k in self.props if _index(k) is None]
        return indexed + named


class JSArray(JSObject):
    class_name = "Array"

    def __init__(self, proto=None, items=None):
        super().__init__(proto)
        self.items = list(items) if items else []

    def get_own(self, key):
        if key == "length":
            return float(len(self.items))
        index = _index(key)
        if index is not None:
            return self.items[index] if index < len(self.items) else _MISSING
        return super().get_own(key)

    def put(self, key, value):
        index = _index(key)
        if index is not None:
            if index >= len(self.items):
                if index - len(self.items) > 1_000_000:
                    # far-out sparse index: keep it as a plain property
                    super().put(key, value)
                    return
                self.items.extend([UNDEFINED] * (index + 1 - len(self.items)))
            self.items[index] = value
        elif key == "length":
            length = int(value) if isinstance(value, float) and value >= 0 and value == int(value) else len(self.items)
            if length < len(self.items):
                del self.items[length:]
            else:
                self.items.extend([UNDEFINED] * min(length - len(self.items), 1_000_000))
        else:
            super().put(key, value)

    def delete(self, key):
        index = _index(key)
        if index is not None and index < len(self.items):
            self.items[index] = UNDEFINED
            return True
        return super().delete(key)

    def own_keys(self):
        return [str(i) for i in range(len(self.items))] + super().own_keys()


class JSFunction(JSObject):
    """A function defined by interpreted code."""
    class_name = "Function"

    def __init__(self, proto, node, closure, object_proto, name=""):
        super().__init__(proto)
        self.node = node
        self.closure = closure
        self.name = name
        self.is_arrow = node.kind == "ArrowFuncExpr"
        self._object_proto = object_proto

    def get_own(self, key):
        if key == "prototype" and not self.is_arrow and "prototype" not in self.props:
            self.props["prototype"] = JSObject(self._object_proto, {"constructor": self})
        if key == "name" and "name" not in self.props:
            return self.name
        if key == "length" and "length" not in self.props:
            return float(sum(1 for p in self.node.params if not p.rest and p.default is None))
        return super().get_own(key)


class NativeFunction(JSObject):
    """A built-in implemented in Python: fn(interp, this, args)."""
    class_name = "Function"

    def __init__(self, proto, fn, name="", ctor=None, props=None):
        super().__init__(proto, props)
        self.fn = fn
        self.name = name
        self.ctor = ctor  # ctor(interp, args) for `new`

    def get_own(self, key):
        if key == "name" and "name" not in self.props:
            return self.name
        return super().get_own(key)


class JSRegExp(JSObject):
    class_name = "RegExp"

    def __init__(self, proto, source, flags, compiled):
        super().__init__(proto, {"lastIndex": 0.0})
        self.source = source
        self.flags = flags
        self.compiled = compiled

    def get_own(self, key):
        if key == "source":
            return self.source
        if key == "flags":
            return self.flags
        if key == "global":
            return "g" in self.flags
        if key == "ignoreCase":
            return "i" in self.flags
        if key == "multiline":
            return "m" in self.flags
        return super().get_own(key)


class JSPromise(JSObject):
    class_name = "Promise"
    PENDING, FULFILLED, REJECTED = "pending", "fulfilled", "rejected"

    def __init__(self, proto):
        super().__init__(proto)
        self.state = self.PENDING
        self.value = UNDEFINED
        self.reactions = []  # (on_fulfilled, on_rejected, derived)


class MockValue:
    """
    Stand-in for anything the sandbox does not define.

    Children are cached per name, so repeated access to the same property
    returns the same object.
    """

    def __init__(self, path, uid, fallthrough=False):
        self.path = path
        self.uid = uid
        self.children = {}
        self.props = {}
        self.fallthrough = fallthrough

    @property
    def root(self):
        return self.path.split(".", 1)[0]

    def __repr__(self):
        return f"<mock {self.path}#{self.uid}>"


def is_callable(value):
    return isinstance(value, (JSFunction, NativeFunction, MockValue))


def is_object(value):
    return isinstance(value, (JSObject, MockValue))


# ---- conversions ----

def typeof(value):
    if value is UNDEFINED:
        return "undefined"
    if value is None:
        return "object"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if is_callable(value):
        return "function"
    return "object"


def to_boolean(value):
    if value is UNDEFINED or value is None:
        return False
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return not (value == 0 or value != value)
    if isinstance(value, str):
        return value != ""
    return True


_NUMERIC = re.compile(r"^[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|Infinity)$")


def string_to_number(text):
    text = text.strip()
    if text == "":
        return 0.0
    lowered = text.lower()
    for prefix, base in (("0x", 16), ("0o", 8), ("0b", 2)):
        if lowered.startswith(prefix):
            try:
                return float(int(text[2:], base))
            except ValueError:
                return NAN
    if not _NUMERIC.match(text):
        return NAN
    return float(text.replace("Infinity", "inf"))


def number_to_string(x, radix=10):
    if x != x:
        return "NaN"
    if x in (INF, -INF):
        return "Infinity" if x > 0 else "-Infinity"
    if x == 0:
        return "0"
    if radix != 10:
        return _radix_string(x, radix)
    if x == int(x) and abs(x) < 1e21:
        return str(int(x))
    mantissa, exponent = np.format_float_scientific(x, unique=True, trim="-").split("e")
    exponent = int(exponent)
    if -7 < exponent < 21:
        return np.format_float_positional(x, unique=True, trim="-")
    return f"{mantissa}e{'+' if exponent > 0 else '-'}{abs(exponent)}"


def _radix_string(x, radix):
    digits = "0123456789abcdefghijklmnopqrstuvwxyz"
    negative = x < 0
    n = int(abs(x))
    out = ""
    while True:
        n, r = divmod(n, radix)
        out = digits[r] + out
        if n == 0:
            break
    return ("-" if negative else "") + out


def to_int32(x):
    if x != x or x in (INF, -INF):
        return 0
    n = int(x) & 0xFFFFFFFF
    return n - 0x100000000 if n >= 0x80000000 else n


def to_uint32(x):
    if x != x or x in (INF, -INF):
        return 0
    return int(x) & 0xFFFFFFFF


def to_integer(x):
    if x != x:
        return 0
    if x in (INF, -INF):
        return int(math.copysign(2 ** 53, x))
    return int(x)


def property_key(value):
    """Property key text for a primitive key value."""
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        return number_to_string(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if value is UNDEFINED:
        return "undefined"
    return None


def strict_equals(a, b):
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, float) and isinstance(b, float):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return a is b


def same_value_zero(a, b):
    if isinstance(a, float) and isinstance(b, float) and a != a and b != b:
        return True
    return strict_equals(a, b)

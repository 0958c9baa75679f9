# builtins.py
"""Standard built-ins for the mock interpreter (Object, Array, String, JSON, Math, ...)."""
import base64
import functools
import json
import math
import re
from urllib.parse import quote, unquote

from jsengine.runtime import (
    INF, NAN, UNDEFINED, JSArray, JSFunction, JSObject, JSPromise, JSRegExp, JSThrow, MockValue,
    NativeFunction, is_callable, is_object, number_to_string, same_value_zero, strict_equals, to_boolean,
    to_int32, to_integer,
)

ERROR_NAMES = ("Error", "TypeError", "RangeError", "SyntaxError", "ReferenceError", "EvalError", "URIError")


def arg(args, index):
    return args[index] if index < len(args) else UNDEFINED


def define(interp, target, name, fn, ctor=None, props=None):
    native = NativeFunction(interp.protos["Function"], fn, name, ctor, props)
    target.put(name, native)
    return native


def install_globals(interp):
    """Create the prototypes and bind every built-in in the global scope."""
    object_proto = JSObject(None)
    function_proto = NativeFunction(object_proto, lambda i, t, a: UNDEFINED, "")
    interp.protos.update({
        "Object": object_proto,
        "Function": function_proto,
        "Array": JSArray(object_proto),
        "String": JSObject(object_proto),
        "Number": JSObject(object_proto),
        "Boolean": JSObject(object_proto),
        "RegExp": JSObject(object_proto),
        "Promise": JSObject(object_proto),
    })
    scope = interp.global_scope
    scope.declare("undefined", UNDEFINED)
    scope.declare("NaN", NAN)
    scope.declare("Infinity", INF)
    for install in (_install_object, _install_function, _install_array, _install_string, _install_number,
                    _install_math, _install_json, _install_errors, _install_regexp, _install_promise,
                    _install_timers, _install_misc):
        install(interp)


def _constructor(interp, name, fn, ctor=None):
    proto = interp.protos[name]
    native = NativeFunction(interp.protos["Function"], fn, name, ctor, {"prototype": proto})
    proto.put("constructor", native)
    interp.global_scope.declare(name, native)
    return native


def _items(interp, value):
    """Elements of an array-like `this`."""
    if isinstance(value, JSArray):
        return value.items
    if isinstance(value, str):
        return list(value)
    if isinstance(value, JSObject):
        length = interp.to_number(value.get("length"))
        count = to_integer(length) if length == length else 0
        return [value.get(str(i)) for i in range(max(0, min(count, 100_000)))]
    return []


def _callback(interp, fn):
    if not is_callable(fn):
        interp.throw_error("TypeError", f"{interp.to_display(fn)} is not a function")
    return fn


def _relative_index(value, length, default):
    if value is UNDEFINED:
        return default
    n = to_integer(value)
    if n < 0:
        return max(length + n, 0)
    return min(n, length)


# ---- Object ----

def _install_object(interp):
    proto = interp.protos["Object"]

    def object_call(interp_, this, args):
        value = arg(args, 0)
        if is_object(value):
            return value
        return interp_.new_object()

    ctor = _constructor(interp, "Object", object_call, lambda i, args: object_call(i, UNDEFINED, args))

    def own_keys(value):
        if isinstance(value, JSObject):
            return value.own_keys()
        if isinstance(value, str):
            return [str(i) for i in range(len(value))]
        return []

    def get_key(value, key):
        return interp.get(value, key)

    define(interp, ctor, "keys", lambda i, t, a: i.new_array(own_keys(arg(a, 0))))
    define(interp, ctor, "getOwnPropertyNames", lambda i, t, a: i.new_array(own_keys(arg(a, 0))))
    define(interp, ctor, "values",
           lambda i, t, a: i.new_array([get_key(arg(a, 0), k) for k in own_keys(arg(a, 0))]))
    define(interp, ctor, "entries",
           lambda i, t, a: i.new_array([i.new_array([k, get_key(arg(a, 0), k)]) for k in own_keys(arg(a, 0))]))

    def assign(interp_, this, args):
        target = arg(args, 0)
        for source in args[1:]:
            for key in own_keys(source):
                interp_.put(target, key, interp_.get(source, key))
        return target

    define(interp, ctor, "assign", assign)

    def create(interp_, this, args):
        parent = arg(args, 0)
        obj = JSObject(parent if isinstance(parent, JSObject) else None)
        descriptors = arg(args, 1)
        if isinstance(descriptors, JSObject):
            for key in descriptors.own_keys():
                _define_property(interp_, obj, key, descriptors.get(key))
        return obj

    define(interp, ctor, "create", create)

    def define_property(interp_, this, args):
        target = arg(args, 0)
        if not is_object(target):
            interp_.throw_error("TypeError", "Object.defineProperty called on non-object")
        _define_property(interp_, target, interp_.to_property_key(arg(args, 1)), arg(args, 2))
        return target

    define(interp, ctor, "defineProperty", define_property)

    def define_properties(interp_, this, args):
        target, descriptors = arg(args, 0), arg(args, 1)
        if isinstance(descriptors, JSObject):
            for key in descriptors.own_keys():
                _define_property(interp_, target, key, descriptors.get(key))
        return target

    define(interp, ctor, "defineProperties", define_properties)

    def get_prototype_of(interp_, this, args):
        value = arg(args, 0)
        if isinstance(value, JSObject):
            return value.proto
        if isinstance(value, str):
            return interp_.protos["String"]
        if isinstance(value, float):
            return interp_.protos["Number"]
        return None

    define(interp, ctor, "getPrototypeOf", get_prototype_of)

    def set_prototype_of(interp_, this, args):
        value, parent = arg(args, 0), arg(args, 1)
        if isinstance(value, JSObject) and (parent is None or isinstance(parent, JSObject)):
            value.proto = parent
        return value

    define(interp, ctor, "setPrototypeOf", set_prototype_of)
    for name in ("freeze", "seal", "preventExtensions"):
        define(interp, ctor, name, lambda i, t, a: arg(a, 0))
    for name in ("isFrozen", "isSealed"):
        define(interp, ctor, name, lambda i, t, a: False)
    define(interp, ctor, "isExtensible", lambda i, t, a: is_object(arg(a, 0)))
    define(interp, ctor, "is", lambda i, t, a: _same_value(arg(a, 0), arg(a, 1)))

    def from_entries(interp_, this, args):
        obj = interp_.new_object()
        for entry in interp_.iterate(arg(args, 0)):
            pair = _items(interp_, entry)
            if pair:
                interp_.put(obj, interp_.to_property_key(pair[0]), pair[1] if len(pair) > 1 else UNDEFINED)
        return obj

    define(interp, ctor, "fromEntries", from_entries)

    def get_own_property_descriptor(interp_, this, args):
        target, key = arg(args, 0), interp_.to_property_key(arg(args, 1))
        if not isinstance(target, JSObject) or key not in target.own_keys():
            return UNDEFINED
        return interp_.new_object({"value": target.get(key), "writable": True,
                                   "enumerable": True, "configurable": True})

    define(interp, ctor, "getOwnPropertyDescriptor", get_own_property_descriptor)

    def has_own_property(interp_, this, args):
        key = interp_.to_property_key(arg(args, 0))
        if isinstance(this, MockValue):
            return True
        if isinstance(this, JSObject):
            return key in this.own_keys() or key in this.props
        if isinstance(this, str):
            return key == "length" or (key.isdigit() and int(key) < len(this))
        return False

    define(interp, proto, "hasOwnProperty", has_own_property)
    define(interp, proto, "propertyIsEnumerable", has_own_property)

    def is_prototype_of(interp_, this, args):
        value = arg(args, 0)
        parent = value.proto if isinstance(value, JSObject) else None
        while parent is not None:
            if parent is this:
                return True
            parent = parent.proto
        return False

    define(interp, proto, "isPrototypeOf", is_prototype_of)

    def object_to_string(interp_, this, args):
        if this is UNDEFINED:
            return "[object Undefined]"
        if this is None:
            return "[object Null]"
        if isinstance(this, JSObject):
            return f"[object {this.class_name}]"
        return f"[object {interp_.typeof_class(this)}]"

    define(interp, proto, "toString", object_to_string)
    define(interp, proto, "toLocaleString", object_to_string)
    define(interp, proto, "valueOf", lambda i, t, a: t)


def _same_value(a, b):
    if isinstance(a, float) and isinstance(b, float):
        if a != a and b != b:
            return True
        if a == 0 and b == 0:
            return math.copysign(1, a) == math.copysign(1, b)
    return strict_equals(a, b)


def _define_property(interp, target, key, descriptor):
    if not isinstance(descriptor, JSObject):
        interp.throw_error("TypeError", "property description must be an object")
    getter = descriptor.get("get")
    if descriptor.has_property("value"):
        interp.put(target, key, descriptor.get("value"))
    elif is_callable(getter):
        # accessors are not modelled; the getter runs once at definition
        interp.queue_callback(getter, [], this=target)
        interp.put(target, key, UNDEFINED)
    else:
        interp.put(target, key, UNDEFINED)


# ---- Function ----

def _install_function(interp):
    proto = interp.protos["Function"]

    def function_ctor(interp_, this, args):
        params = [interp_.to_string(a) for a in args[:-1]]
        body = interp_.to_string(args[-1]) if args else ""
        return interp_.compile_function(params, body)

    ctor = _constructor(interp, "Function", function_ctor, lambda i, args: function_ctor(i, UNDEFINED, args))
    ctor.put("prototype", proto)

    def call(interp_, this, args):
        return interp_.call(this, arg(args, 0), list(args[1:]))

    def apply(interp_, this, args):
        array_like = arg(args, 1)
        values = [] if array_like in (UNDEFINED, None) else list(_items(interp_, array_like))
        return interp_.call(this, arg(args, 0), values)

    def bind(interp_, this, args):
        target = _callback(interp_, this)
        bound_this, bound_args = arg(args, 0), list(args[1:])

        def bound(i, _this, call_args):
            return i.call(target, bound_this, bound_args + list(call_args))

        def bound_ctor(i, call_args):
            return i.construct(target, bound_args + list(call_args))

        return NativeFunction(proto, bound, "bound " + str(getattr(target, "name", "")), bound_ctor)

    def to_string(interp_, this, args):
        if isinstance(this, JSFunction):
            return interp_.function_source(this)
        if isinstance(this, NativeFunction):
            return f"function {this.name}() {{ [native code] }}"
        if isinstance(this, MockValue):
            return this.path
        interp_.throw_error("TypeError", "Function.prototype.toString requires a function")

    define(interp, proto, "call", call)
    define(interp, proto, "apply", apply)
    define(interp, proto, "bind", bind)
    define(interp, proto, "toString", to_string)


# ---- Array ----

def _install_array(interp):
    proto = interp.protos["Array"]

    def array_call(interp_, this, args):
        if len(args) == 1 and isinstance(args[0], float):
            length = args[0]
            if length < 0 or length != int(length) or length > 10_000_000:
                interp_.throw_error("RangeError", "Invalid array length")
            return interp_.new_array([UNDEFINED] * int(length))
        return interp_.new_array(list(args))

    ctor = _constructor(interp, "Array", array_call, lambda i, args: array_call(i, UNDEFINED, args))
    define(interp, ctor, "isArray", lambda i, t, a: isinstance(arg(a, 0), JSArray))
    define(interp, ctor, "of", lambda i, t, a: i.new_array(list(a)))

    def array_from(interp_, this, args):
        source, mapper = arg(args, 0), arg(args, 1)
        if isinstance(source, JSObject) and not isinstance(source, JSArray) and source.has_property("length"):
            values = _items(interp_, source)
        else:
            values = interp_.iterate(source)
        if is_callable(mapper):
            values = [interp_.call(mapper, UNDEFINED, [v, float(n)]) for n, v in enumerate(values)]
        return interp_.new_array(list(values))

    define(interp, ctor, "from", array_from)

    def mutable(interp_, this):
        if not isinstance(this, JSArray):
            return None
        return this

    def push(interp_, this, args):
        array = mutable(interp_, this)
        if array is None:
            return UNDEFINED
        array.items.extend(args)
        return float(len(array.items))

    def pop(interp_, this, args):
        array = mutable(interp_, this)
        return array.items.pop() if array is not None and array.items else UNDEFINED

    def shift(interp_, this, args):
        array = mutable(interp_, this)
        return array.items.pop(0) if array is not None and array.items else UNDEFINED

    def unshift(interp_, this, args):
        array = mutable(interp_, this)
        if array is None:
            return UNDEFINED
        array.items[0:0] = args
        return float(len(array.items))

    def slice_(interp_, this, args):
        values = _items(interp_, this)
        start = _relative_index(arg(args, 0), len(values), 0)
        end = _relative_index(arg(args, 1), len(values), len(values))
        return interp_.new_array(values[start:end])

    def splice(interp_, this, args):
        array = mutable(interp_, this)
        if array is None:
            return interp_.new_array([])
        length = len(array.items)
        start = _relative_index(arg(args, 0), length, 0)
        if len(args) < 2:
            count = length - start
        else:
            count = max(0, min(to_integer(interp_.to_number(args[1])), length - start))
        removed = array.items[start:start + count]
        array.items[start:start + count] = list(args[2:])
        return interp_.new_array(removed)

    def concat(interp_, this, args):
        values = list(_items(interp_, this))
        for value in args:
            if isinstance(value, JSArray):
                values.extend(value.items)
            else:
                values.append(value)
        return interp_.new_array(values)

    def join(interp_, this, args):
        separator = "," if arg(args, 0) is UNDEFINED else interp_.to_string(args[0])
        return separator.join("" if v in (UNDEFINED, None) else interp_.to_string(v) for v in _items(interp_, this))

    def reverse(interp_, this, args):
        array = mutable(interp_, this)
        if array is not None:
            array.items.reverse()
        return this

    def index_of(interp_, this, args):
        values = _items(interp_, this)
        target = arg(args, 0)
        start = _relative_index(arg(args, 1), len(values), 0)
        for n in range(start, len(values)):
            if strict_equals(values[n], target):
                return float(n)
        return -1.0

    def last_index_of(interp_, this, args):
        values = _items(interp_, this)
        target = arg(args, 0)
        for n in range(len(values) - 1, -1, -1):
            if strict_equals(values[n], target):
                return float(n)
        return -1.0

    def includes(interp_, this, args):
        target = arg(args, 0)
        return any(same_value_zero(v, target) for v in _items(interp_, this))

    def iterate_with(interp_, this, args):
        fn = _callback(interp_, arg(args, 0))
        this_arg = arg(args, 1)
        values = list(_items(interp_, this))
        for n, value in enumerate(values):
            yield n, value, interp_.call(fn, this_arg, [value, float(n), this])

    def for_each(interp_, this, args):
        for _ in iterate_with(interp_, this, args):
            pass
        return UNDEFINED

    def map_(interp_, this, args):
        return interp_.new_array([result for _, _, result in iterate_with(interp_, this, args)])

    def filter_(interp_, this, args):
        return interp_.new_array([value for _, value, result in iterate_with(interp_, this, args)
                                  if to_boolean(result)])

    def some(interp_, this, args):
        return any(to_boolean(result) for _, _, result in iterate_with(interp_, this, args))

    def every(interp_, this, args):
        return all(to_boolean(result) for _, _, result in iterate_with(interp_, this, args))

    def find(interp_, this, args):
        for _, value, result in iterate_with(interp_, this, args):
            if to_boolean(result):
                return value
        return UNDEFINED

    def find_index(interp_, this, args):
        for n, _, result in iterate_with(interp_, this, args):
            if to_boolean(result):
                return float(n)
        return -1.0

    def reducer(reverse_order):
        def reduce_(interp_, this, args):
            fn = _callback(interp_, arg(args, 0))
            values = list(enumerate(_items(interp_, this)))
            if reverse_order:
                values.reverse()
            if len(args) >= 2:
                accumulator = args[1]
            elif values:
                accumulator = values.pop(0)[1]
            else:
                interp_.throw_error("TypeError", "Reduce of empty array with no initial value")
            for n, value in values:
                accumulator = interp_.call(fn, UNDEFINED, [accumulator, value, float(n), this])
            return accumulator
        return reduce_

    def sort(interp_, this, args):
        array = mutable(interp_, this)
        if array is None:
            return this
        comparator = arg(args, 0)
        defined = [v for v in array.items if v is not UNDEFINED]
        missing = len(array.items) - len(defined)
        if is_callable(comparator):
            def compare(a, b):
                result = interp_.to_number(interp_.call(comparator, UNDEFINED, [a, b]))
                return 0 if result != result else (result > 0) - (result < 0)
            defined.sort(key=functools.cmp_to_key(compare))
        else:
            defined.sort(key=interp_.to_string)
        array.items[:] = defined + [UNDEFINED] * missing
        return array

    def fill(interp_, this, args):
        array = mutable(interp_, this)
        if array is None:
            return this
        length = len(array.items)
        start = _relative_index(arg(args, 1), length, 0)
        end = _relative_index(arg(args, 2), length, length)
        for n in range(start, end):
            array.items[n] = arg(args, 0)
        return array

    def flat(interp_, this, args):
        depth = 1 if arg(args, 0) is UNDEFINED else to_integer(interp_.to_number(args[0]))

        def flatten(values, level):
            out = []
            for value in values:
                if isinstance(value, JSArray) and level > 0:
                    out.extend(flatten(value.items, level - 1))
                else:
                    out.append(value)
            return out

        return interp_.new_array(flatten(_items(interp_, this), depth))

    def flat_map(interp_, this, args):
        mapped = interp_.new_array([result for _, _, result in iterate_with(interp_, this, args)])
        return flat(interp_, mapped, [1.0])

    def at(interp_, this, args):
        values = _items(interp_, this)
        n = to_integer(interp_.to_number(arg(args, 0)))
        n = n + len(values) if n < 0 else n
        return values[n] if 0 <= n < len(values) else UNDEFINED

    for name, fn in (("push", push), ("pop", pop), ("shift", shift), ("unshift", unshift),
                     ("slice", slice_), ("splice", splice), ("concat", concat), ("join", join),
                     ("reverse", reverse), ("indexOf", index_of), ("lastIndexOf", last_index_of),
                     ("includes", includes), ("forEach", for_each), ("map", map_), ("filter", filter_),
                     ("some", some), ("every", every), ("find", find), ("findIndex", find_index),
                     ("reduce", reducer(False)), ("reduceRight", reducer(True)), ("sort", sort),
                     ("fill", fill), ("flat", flat), ("flatMap", flat_map), ("at", at)):
        define(interp, proto, name, fn)
    define(interp, proto, "toString", join)
    define(interp, proto, "keys", lambda i, t, a: i.new_array([float(n) for n in range(len(_items(i, t)))]))
    define(interp, proto, "values", lambda i, t, a: i.new_array(list(_items(i, t))))
    define(interp, proto, "entries",
           lambda i, t, a: i.new_array([i.new_array([float(n), v]) for n, v in enumerate(_items(i, t))]))


# ---- String ----

def _install_string(interp):
    proto = interp.protos["String"]

    def string_call(interp_, this, args):
        return interp_.to_string(args[0]) if args else ""

    ctor = _constructor(interp, "String", string_call, lambda i, args: string_call(i, UNDEFINED, args))

    def from_char_code(interp_, this, args):
        return "".join(chr(to_int32(interp_.to_number(a)) & 0xFFFF) for a in args)

    define(interp, ctor, "fromCharCode", from_char_code)
    define(interp, ctor, "fromCodePoint",
           lambda i, t, a: "".join(chr(min(max(to_integer(i.to_number(v)), 0), 0x10FFFF)) for v in a))

    def method(name):
        def wrap(fn):
            define(interp, proto, name, lambda i, this, args: fn(i, i.to_string(this), args))
            return fn
        return wrap

    def num(interp_, args, index, default=0):
        value = arg(args, index)
        return default if value is UNDEFINED else to_integer(interp_.to_number(value))

    @method("charAt")
    def char_at(i, s, args):
        n = num(i, args, 0)
        return s[n] if 0 <= n < len(s) else ""

    @method("charCodeAt")
    def char_code_at(i, s, args):
        n = num(i, args, 0)
        return float(ord(s[n])) if 0 <= n < len(s) else NAN

    @method("codePointAt")
    def code_point_at(i, s, args):
        n = num(i, args, 0)
        return float(ord(s[n])) if 0 <= n < len(s) else UNDEFINED

    @method("indexOf")
    def index_of(i, s, args):
        return float(s.find(i.to_string(arg(args, 0)), max(0, num(i, args, 1))))

    @method("lastIndexOf")
    def last_index_of(i, s, args):
        return float(s.rfind(i.to_string(arg(args, 0))))

    @method("includes")
    def includes(i, s, args):
        return i.to_string(arg(args, 0)) in s[max(0, num(i, args, 1)):]

    @method("startsWith")
    def starts_with(i, s, args):
        return s.startswith(i.to_string(arg(args, 0)), max(0, num(i, args, 1)))

    @method("endsWith")
    def ends_with(i, s, args):
        end = num(i, args, 1, len(s))
        return s[:end].endswith(i.to_string(arg(args, 0)))

    @method("slice")
    def slice_(i, s, args):
        start = _relative_index(arg(args, 0), len(s), 0)
        end = _relative_index(arg(args, 1), len(s), len(s))
        return s[start:end]

    @method("substring")
    def substring(i, s, args):
        start = min(max(num(i, args, 0), 0), len(s))
        end = min(max(num(i, args, 1, len(s)), 0), len(s))
        if start > end:
            start, end = end, start
        return s[start:end]

    @method("substr")
    def substr(i, s, args):
        start = _relative_index(arg(args, 0), len(s), 0)
        length = num(i, args, 1, len(s) - start)
        return s[start:start + max(0, length)]

    @method("toLowerCase")
    def lower(i, s, args):
        return s.lower()

    @method("toUpperCase")
    def upper(i, s, args):
        return s.upper()

    define(interp, proto, "toLocaleLowerCase", proto.get("toLowerCase").fn)
    define(interp, proto, "toLocaleUpperCase", proto.get("toUpperCase").fn)

    @method("trim")
    def trim(i, s, args):
        return s.strip()

    @method("trimStart")
    def trim_start(i, s, args):
        return s.lstrip()

    @method("trimEnd")
    def trim_end(i, s, args):
        return s.rstrip()

    @method("repeat")
    def repeat(i, s, args):
        count = num(i, args, 0)
        if count < 0 or count * len(s) > 10_000_000:
            i.throw_error("RangeError", "Invalid count value")
        return s * count

    def pad(i, s, args, left):
        target = num(i, args, 0)
        filler = " " if arg(args, 1) is UNDEFINED else i.to_string(args[1])
        if target <= len(s) or not filler or target > 10_000_000:
            return s
        padding = (filler * (target // len(filler) + 1))[:target - len(s)]
        return padding + s if left else s + padding

    define(interp, proto, "padStart", lambda i, t, a: pad(i, i.to_string(t), a, True))
    define(interp, proto, "padEnd", lambda i, t, a: pad(i, i.to_string(t), a, False))

    @method("concat")
    def concat(i, s, args):
        return s + "".join(i.to_string(a) for a in args)

    @method("at")
    def at(i, s, args):
        n = num(i, args, 0)
        n = n + len(s) if n < 0 else n
        return s[n] if 0 <= n < len(s) else UNDEFINED

    @method("localeCompare")
    def locale_compare(i, s, args):
        other = i.to_string(arg(args, 0))
        return float((s > other) - (s < other))

    @method("normalize")
    def normalize(i, s, args):
        return s

    @method("toString")
    def to_string(i, s, args):
        return s

    define(interp, proto, "valueOf", proto.get("toString").fn)

    @method("split")
    def split(i, s, args):
        separator, limit = arg(args, 0), arg(args, 1)
        if separator is UNDEFINED:
            parts = [s]
        elif isinstance(separator, JSRegExp):
            parts = [UNDEFINED if p is None else p for p in separator.compiled.split(s)]
            if parts and parts[0] == "" and len(s) == 0:
                parts = []
        else:
            sep = i.to_string(separator)
            parts = list(s) if sep == "" else s.split(sep)
        if limit is not UNDEFINED:
            parts = parts[:max(0, to_integer(i.to_number(limit)))]
        return i.new_array(parts)

    @method("replace")
    def replace(i, s, args):
        return _replace(i, s, arg(args, 0), arg(args, 1), replace_all=False)

    @method("replaceAll")
    def replace_all(i, s, args):
        return _replace(i, s, arg(args, 0), arg(args, 1), replace_all=True)

    @method("match")
    def match(i, s, args):
        rx = _as_regexp(i, arg(args, 0))
        if "g" not in rx.flags:
            return regexp_exec(i, rx, s)
        found = [m.group(0) for m in rx.compiled.finditer(s)]
        rx.put("lastIndex", 0.0)
        return i.new_array(found) if found else None

    @method("matchAll")
    def match_all(i, s, args):
        rx = _as_regexp(i, arg(args, 0))
        return i.new_array([_match_array(i, m, s) for m in rx.compiled.finditer(s)])

    @method("search")
    def search(i, s, args):
        m = _as_regexp(i, arg(args, 0)).compiled.search(s)
        return float(m.start()) if m else -1.0


def _expand_replacement(template, m, s):
    out = []
    n = 0
    while n < len(template):
        ch = template[n]
        if ch == "$" and n + 1 < len(template):
            nxt = template[n + 1]
            if nxt == "$":
                out.append("$")
                n += 2
                continue
            if nxt == "&":
                out.append(m.group(0))
                n += 2
                continue
            if nxt == "`":
                out.append(s[:m.start()])
                n += 2
                continue
            if nxt == "'":
                out.append(s[m.end():])
                n += 2
                continue
            if nxt.isdigit():
                digits = template[n + 1:n + 3] if template[n + 1:n + 3].isdigit() else nxt
                if len(digits) == 2 and int(digits) > (m.re.groups if hasattr(m, "re") else 0):
                    digits = nxt
                index = int(digits)
                if 0 < index <= (m.re.groups if hasattr(m, "re") else 0):
                    out.append(m.group(index) or "")
                    n += 1 + len(digits)
                    continue
            if nxt == "<" and hasattr(m, "re"):
                close = template.find(">", n)
                if close > 0:
                    name = template[n + 2:close]
                    out.append((m.groupdict().get(name) or "") if name in m.re.groupindex else "")
                    n = close + 1
                    continue
        out.append(ch)
        n += 1
    return "".join(out)


class _LiteralMatch:
    """Minimal match object for string patterns."""

    def __init__(self, start, text):
        self._start = start
        self._text = text

    def group(self, index=0):
        return self._text

    def start(self):
        return self._start

    def end(self):
        return self._start + len(self._text)

    def groups(self):
        return ()


def _replace(interp, s, pattern, replacement, replace_all):
    if isinstance(pattern, JSRegExp):
        matches = list(pattern.compiled.finditer(s)) if (replace_all or "g" in pattern.flags) \
            else [m for m in [pattern.compiled.search(s)] if m]
    else:
        needle = interp.to_string(pattern)
        matches = []
        start = 0
        while True:
            found = s.find(needle, start)
            if found < 0:
                break
            matches.append(_LiteralMatch(found, needle))
            if not replace_all:
                break
            start = found + max(1, len(needle))
            if start > len(s):
                break
    out, last = [], 0
    for m in matches:
        out.append(s[last:m.start()])
        if is_callable(replacement):
            groups = [UNDEFINED if g is None else g for g in m.groups()]
            result = interp.call(replacement, UNDEFINED, [m.group(0)] + groups + [float(m.start()), s])
            out.append(interp.to_string(result))
        else:
            out.append(_expand_replacement(interp.to_string(replacement), m, s))
        last = m.end()
    out.append(s[last:])
    return "".join(out)


# ---- Number / Boolean ----

_INT_PREFIX = re.compile(r"^[+-]?[0-9a-zA-Z]+")
_FLOAT_PREFIX = re.compile(r"^[+-]?(Infinity|\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)")


def parse_int(text, radix_value):
    text = text.strip()
    sign = 1
    if text[:1] in "+-" and text:
        sign = -1 if text[0] == "-" else 1
        text = text[1:]
    radix = radix_value
    if radix == 0:
        radix = 10
        if text[:2].lower() == "0x":
            radix, text = 16, text[2:]
    elif radix == 16 and text[:2].lower() == "0x":
        text = text[2:]
    if radix < 2 or radix > 36:
        return NAN
    digits = "0123456789abcdefghijklmnopqrstuvwxyz"[:radix]
    end = 0
    while end < len(text) and text[end].lower() in digits:
        end += 1
    if end == 0:
        return NAN
    return float(sign * int(text[:end], radix))


def parse_float(text):
    m = _FLOAT_PREFIX.match(text.strip())
    if not m:
        return NAN
    return float(m.group(0).replace("Infinity", "inf"))


def _install_number(interp):
    number_proto = interp.protos["Number"]

    def number_call(interp_, this, args):
        return interp_.to_number(args[0]) if args else 0.0

    ctor = _constructor(interp, "Number", number_call, lambda i, args: number_call(i, UNDEFINED, args))
    for name, value in (("MAX_SAFE_INTEGER", float(2 ** 53 - 1)), ("MIN_SAFE_INTEGER", float(-(2 ** 53 - 1))),
                        ("EPSILON", 2.0 ** -52), ("MAX_VALUE", 1.7976931348623157e308), ("MIN_VALUE", 5e-324),
                        ("POSITIVE_INFINITY", INF), ("NEGATIVE_INFINITY", -INF), ("NaN", NAN)):
        ctor.put(name, value)

    def is_finite_number(value):
        return isinstance(value, float) and value == value and value not in (INF, -INF)

    define(interp, ctor, "isFinite", lambda i, t, a: is_finite_number(arg(a, 0)))
    define(interp, ctor, "isNaN", lambda i, t, a: isinstance(arg(a, 0), float) and arg(a, 0) != arg(a, 0))
    define(interp, ctor, "isInteger",
           lambda i, t, a: is_finite_number(arg(a, 0)) and arg(a, 0) == int(arg(a, 0)))
    define(interp, ctor, "isSafeInteger",
           lambda i, t, a: is_finite_number(arg(a, 0)) and arg(a, 0) == int(arg(a, 0)) and abs(arg(a, 0)) < 2 ** 53)

    def parse_int_native(interp_, this, args):
        radix = arg(args, 1)
        radix = 0 if radix is UNDEFINED else to_int32(interp_.to_number(radix))
        return parse_int(interp_.to_string(arg(args, 0)), radix)

    def parse_float_native(interp_, this, args):
        return parse_float(interp_.to_string(arg(args, 0)))

    ctor.put("parseInt", define(interp, interp.global_natives, "parseInt", parse_int_native))
    ctor.put("parseFloat", define(interp, interp.global_natives, "parseFloat", parse_float_native))
    interp.global_scope.declare("parseInt", ctor.get("parseInt"))
    interp.global_scope.declare("parseFloat", ctor.get("parseFloat"))

    def this_number(interp_, this):
        if isinstance(this, float):
            return this
        interp_.throw_error("TypeError", "Number.prototype method called on incompatible receiver")

    def to_string(interp_, this, args):
        radix = arg(args, 0)
        radix = 10 if radix is UNDEFINED else to_integer(interp_.to_number(radix))
        if radix < 2 or radix > 36:
            interp_.throw_error("RangeError", "toString() radix must be between 2 and 36")
        return number_to_string(this_number(interp_, this), radix)

    def to_fixed(interp_, this, args):
        value = this_number(interp_, this)
        digits = to_integer(interp_.to_number(arg(args, 0))) if args else 0
        if digits < 0 or digits > 100:
            interp_.throw_error("RangeError", "toFixed() digits argument must be between 0 and 100")
        if value != value or abs(value) >= 1e21:
            return number_to_string(value)
        return f"{value:.{digits}f}"

    define(interp, number_proto, "toString", to_string)
    define(interp, number_proto, "toFixed", to_fixed)
    define(interp, number_proto, "toLocaleString", lambda i, t, a: number_to_string(this_number(i, t)))
    define(interp, number_proto, "valueOf", lambda i, t, a: this_number(i, t))

    def boolean_call(interp_, this, args):
        return to_boolean(arg(args, 0))

    boolean_proto = interp.protos["Boolean"]
    _constructor(interp, "Boolean", boolean_call, lambda i, args: boolean_call(i, UNDEFINED, args))
    define(interp, boolean_proto, "toString", lambda i, t, a: "true" if t is True else "false")
    define(interp, boolean_proto, "valueOf", lambda i, t, a: t)


# ---- Math ----

def _install_math(interp):
    math_obj = interp.new_object()
    interp.global_scope.declare("Math", math_obj)
    for name, value in (("PI", math.pi), ("E", math.e), ("LN2", math.log(2)), ("LN10", math.log(10)),
                        ("LOG2E", 1 / math.log(2)), ("LOG10E", 1 / math.log(10)),
                        ("SQRT2", math.sqrt(2)), ("SQRT1_2", math.sqrt(0.5))):
        math_obj.put(name, value)

    def unary(fn):
        def native(interp_, this, args):
            x = interp_.to_number(arg(args, 0))
            try:
                return float(fn(x))
            except (ValueError, ZeroDivisionError):
                return NAN
            except OverflowError:
                return INF
        return native

    def js_round(x):
        if x != x or x in (INF, -INF):
            return x
        return math.floor(x + 0.5)

    def sign(x):
        if x != x or x == 0:
            return x
        return 1.0 if x > 0 else -1.0

    def safe(fn):
        def wrapped(x):
            if x != x:
                return NAN
            if x in (INF, -INF) and fn in (math.floor, math.ceil, math.trunc):
                return x
            return fn(x)
        return wrapped

    for name, fn in (("abs", abs), ("floor", safe(math.floor)), ("ceil", safe(math.ceil)),
                     ("trunc", safe(math.trunc)), ("round", js_round), ("sign", sign), ("sqrt", safe(math.sqrt)),
                     ("cbrt", lambda x: math.copysign(abs(x) ** (1 / 3), x)), ("exp", safe(math.exp)),
                     ("log", safe(math.log)), ("log2", safe(math.log2)), ("log10", safe(math.log10)),
                     ("sin", safe(math.sin)), ("cos", safe(math.cos)), ("tan", safe(math.tan)),
                     ("asin", safe(math.asin)), ("acos", safe(math.acos)), ("atan", safe(math.atan))):
        define(interp, math_obj, name, unary(fn))

    def min_max(pick, empty):
        def native(interp_, this, args):
            values = [interp_.to_number(a) for a in args]
            if any(v != v for v in values):
                return NAN
            return pick(values) if values else empty
        return native

    define(interp, math_obj, "min", min_max(min, INF))
    define(interp, math_obj, "max", min_max(max, -INF))
    define(interp, math_obj, "pow",
           lambda i, t, a: i.binary_op("**", i.to_number(arg(a, 0)), i.to_number(arg(a, 1))))
    define(interp, math_obj, "atan2",
           lambda i, t, a: math.atan2(i.to_number(arg(a, 0)), i.to_number(arg(a, 1))))
    define(interp, math_obj, "hypot", lambda i, t, a: math.hypot(*[i.to_number(v) for v in a]))
    define(interp, math_obj, "random", lambda i, t, a: i.random.random())


# ---- JSON ----

def _from_python(interp, value):
    if isinstance(value, dict):
        obj = interp.new_object()
        for key, item in value.items():
            obj.put(key, _from_python(interp, item))
        return obj
    if isinstance(value, list):
        return interp.new_array([_from_python(interp, v) for v in value])
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    return float(value)


def _json_quote(text):
    return json.dumps(text, ensure_ascii=False)


def json_stringify(interp, value, indent="", current="", stack=None):
    """JSON text for an interpreter value; UNDEFINED when it has no JSON form."""
    stack = stack if stack is not None else []
    if isinstance(value, (JSObject, MockValue)) and not is_callable(value):
        to_json = interp.get(value, "toJSON")
        if is_callable(to_json) and not isinstance(value, MockValue):
            value = interp.call(to_json, value, [])
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        return _json_quote(value)
    if isinstance(value, float):
        return number_to_string(value) if value == value and value not in (INF, -INF) else "null"
    if value is UNDEFINED or is_callable(value):
        return UNDEFINED
    if any(value is seen for seen in stack):
        interp.throw_error("TypeError", "Converting circular structure to JSON")
    stack.append(value)
    inner = current + indent
    separator = ",\n" + inner if indent else ","
    if isinstance(value, JSArray):
        parts = []
        for item in value.items:
            text = json_stringify(interp, item, indent, inner, stack)
            parts.append("null" if text is UNDEFINED else text)
        stack.pop()
        if not parts:
            return "[]"
        if indent:
            return "[\n" + inner + separator.join(parts) + "\n" + current + "]"
        return "[" + separator.join(parts) + "]"
    parts = []
    for key in value.own_keys():
        text = json_stringify(interp, value.get(key), indent, inner, stack)
        if text is not UNDEFINED:
            parts.append(_json_quote(key) + (": " if indent else ":") + text)
    stack.pop()
    if not parts:
        return "{}"
    if indent:
        return "{\n" + inner + separator.join(parts) + "\n" + current + "}"
    return "{" + separator.join(parts) + "}"


def _install_json(interp):
    json_obj = interp.new_object()
    interp.global_scope.declare("JSON", json_obj)

    def parse(interp_, this, args):
        text = interp_.to_string(arg(args, 0))
        try:
            return _from_python(interp_, json.loads(text))
        except (ValueError, RecursionError) as e:
            interp_.throw_error("SyntaxError", f"JSON.parse: {e}")

    def stringify(interp_, this, args):
        space = arg(args, 2)
        if isinstance(space, float):
            indent = " " * max(0, min(10, to_integer(space)))
        elif isinstance(space, str):
            indent = space[:10]
        else:
            indent = ""
        return json_stringify(interp_, arg(args, 0), indent)

    define(interp, json_obj, "parse", parse)
    define(interp, json_obj, "stringify", stringify)


# ---- errors ----

def make_error(interp, name, message):
    error = JSObject(interp.protos[name])
    error.class_name = "Error"
    error.put("message", message)
    error.put("stack", f"{name}: {message}" if message else name)
    return error


def _install_errors(interp):
    base = None
    for name in ERROR_NAMES:
        proto = JSObject(interp.protos["Error"] if base is not None else interp.protos["Object"])
        interp.protos[name] = proto
        proto.put("name", name)
        proto.put("message", "")

        def error_call(interp_, this, args, _name=name):
            message = arg(args, 0)
            return make_error(interp_, _name, "" if message is UNDEFINED else interp_.to_string(message))

        ctor = _constructor(interp, name, error_call,
                            lambda i, args, _call=error_call: _call(i, UNDEFINED, args))
        if base is None:
            base = ctor
            define(interp, ctor, "captureStackTrace", lambda i, t, a: UNDEFINED)

            def error_to_string(interp_, this, args):
                name_ = interp_.get(this, "name")
                message = interp_.get(this, "message")
                name_ = "Error" if name_ is UNDEFINED else interp_.to_string(name_)
                message = "" if message is UNDEFINED else interp_.to_string(message)
                if not message:
                    return name_
                return f"{name_}: {message}" if name_ else message

            define(interp, proto, "toString", error_to_string)


# ---- RegExp ----

_NAMED_GROUP = re.compile(r"\(\?<(?![=!])")
_NAMED_BACKREF = re.compile(r"\\k<([A-Za-z_$][\w$]*)>")


def translate_regex(pattern):
    """Rewrite JavaScript regex syntax Python's re spells differently."""
    pattern = _NAMED_GROUP.sub("(?P<", pattern)
    pattern = _NAMED_BACKREF.sub(r"(?P=\1)", pattern)
    pattern = pattern.replace("[^]", r"[\s\S]").replace("(?P<$", "(?P<_")
    return pattern


def compile_regexp(interp, source, flags):
    if set(flags) - set("gimsyu") or len(set(flags)) != len(flags):
        interp.throw_error("SyntaxError", f"Invalid regular expression flags '{flags}'")
    options = 0
    if "i" in flags:
        options |= re.IGNORECASE
    if "m" in flags:
        options |= re.MULTILINE
    if "s" in flags:
        options |= re.DOTALL
    try:
        compiled = re.compile(translate_regex(source), options)
    except (re.error, RecursionError, OverflowError) as e:
        interp.throw_error("SyntaxError", f"Invalid regular expression: /{source}/: {e}")
    return JSRegExp(interp.protos["RegExp"], source, flags, compiled)


def _as_regexp(interp, value):
    if isinstance(value, JSRegExp):
        return value
    source = "(?:)" if value is UNDEFINED else re.escape(interp.to_string(value))
    return compile_regexp(interp, source, "")


def _match_array(interp, m, s):
    groups = [UNDEFINED if g is None else g for g in m.groups()]
    result = interp.new_array([m.group(0)] + groups)
    result.put("index", float(m.start()))
    result.put("input", s)
    named = m.groupdict()
    if named:
        result.put("groups", interp.new_object({k: (UNDEFINED if v is None else v) for k, v in named.items()}))
    else:
        result.put("groups", UNDEFINED)
    return result


def regexp_exec(interp, rx, s):
    sticky = "y" in rx.flags
    stateful = sticky or "g" in rx.flags
    start = to_integer(interp.to_number(rx.get("lastIndex"))) if stateful else 0
    if start > len(s):
        rx.put("lastIndex", 0.0)
        return None
    m = rx.compiled.match(s, start) if sticky else rx.compiled.search(s, start)
    if m is None:
        if stateful:
            rx.put("lastIndex", 0.0)
        return None
    if stateful:
        rx.put("lastIndex", float(m.end() if m.end() > m.start() else m.end() + 1))
    return _match_array(interp, m, s)


def _install_regexp(interp):
    proto = interp.protos["RegExp"]

    def regexp_call(interp_, this, args):
        pattern, flags = arg(args, 0), arg(args, 1)
        if isinstance(pattern, JSRegExp):
            source = pattern.source
            flags = pattern.flags if flags is UNDEFINED else interp_.to_string(flags)
        else:
            source = "(?:)" if pattern is UNDEFINED else interp_.to_string(pattern)
            flags = "" if flags is UNDEFINED else interp_.to_string(flags)
        return compile_regexp(interp_, source, flags)

    _constructor(interp, "RegExp", regexp_call, lambda i, args: regexp_call(i, UNDEFINED, args))

    def this_regexp(interp_, this):
        if not isinstance(this, JSRegExp):
            interp_.throw_error("TypeError", "RegExp method called on incompatible receiver")
        return this

    define(interp, proto, "exec", lambda i, t, a: regexp_exec(i, this_regexp(i, t), i.to_string(arg(a, 0))))
    define(interp, proto, "test",
           lambda i, t, a: regexp_exec(i, this_regexp(i, t), i.to_string(arg(a, 0))) is not None)
    define(interp, proto, "toString", lambda i, t, a: f"/{this_regexp(i, t).source}/{t.flags}")


# ---- Promise ----

def _settle(interp, promise, state, value):
    if promise.state != JSPromise.PENDING:
        return
    promise.state = state
    promise.value = value
    reactions, promise.reactions = promise.reactions, []
    for reaction in reactions:
        _schedule_reaction(interp, promise, reaction)


def resolve_promise(interp, promise, value):
    if value is promise:
        _settle(interp, promise, JSPromise.REJECTED, make_error(interp, "TypeError", "Chaining cycle"))
        return
    if isinstance(value, JSPromise):
        _then(interp, value,
              NativeFunction(interp.protos["Function"], lambda i, t, a: resolve_promise(i, promise, arg(a, 0)) or UNDEFINED),
              NativeFunction(interp.protos["Function"], lambda i, t, a: reject_promise(i, promise, arg(a, 0)) or UNDEFINED))
        return
    _settle(interp, promise, JSPromise.FULFILLED, value)


def reject_promise(interp, promise, reason):
    _settle(interp, promise, JSPromise.REJECTED, reason)


def _schedule_reaction(interp, promise, reaction):
    on_fulfilled, on_rejected, derived = reaction
    handler = on_fulfilled if promise.state == JSPromise.FULFILLED else on_rejected
    if not is_callable(handler):
        if promise.state == JSPromise.FULFILLED:
            resolve_promise(interp, derived, promise.value)
        else:
            reject_promise(interp, derived, promise.value)
        return
    interp.queue_callback(handler, [promise.value],
                          on_done=lambda result: resolve_promise(interp, derived, result),
                          on_error=lambda error: reject_promise(interp, derived, error))


def _then(interp, promise, on_fulfilled, on_rejected):
    derived = JSPromise(interp.protos["Promise"])
    reaction = (on_fulfilled, on_rejected, derived)
    if promise.state == JSPromise.PENDING:
        promise.reactions.append(reaction)
    else:
        _schedule_reaction(interp, promise, reaction)
    return derived


def _install_promise(interp):
    proto = interp.protos["Promise"]

    def resolvers(promise):
        fn_proto = interp.protos["Function"]
        return (NativeFunction(fn_proto, lambda i, t, a: resolve_promise(i, promise, arg(a, 0)) or UNDEFINED, "resolve"),
                NativeFunction(fn_proto, lambda i, t, a: reject_promise(i, promise, arg(a, 0)) or UNDEFINED, "reject"))

    def promise_ctor(interp_, args):
        executor = _callback(interp_, arg(args, 0))
        promise = JSPromise(proto)
        resolve, reject = resolvers(promise)
        try:
            interp_.call(executor, UNDEFINED, [resolve, reject])
        except JSThrow as thrown:
            reject_promise(interp_, promise, thrown.value)
        return promise

    def promise_call(interp_, this, args):
        interp_.throw_error("TypeError", "Promise constructor cannot be invoked without 'new'")

    ctor = _constructor(interp, "Promise", promise_call, promise_ctor)

    def this_promise(interp_, this):
        if not isinstance(this, JSPromise):
            interp_.throw_error("TypeError", "Promise method called on incompatible receiver")
        return this

    define(interp, proto, "then", lambda i, t, a: _then(i, this_promise(i, t), arg(a, 0), arg(a, 1)))
    define(interp, proto, "catch", lambda i, t, a: _then(i, this_promise(i, t), UNDEFINED, arg(a, 0)))
    define(interp, proto, "finally", lambda i, t, a: _then(i, this_promise(i, t), arg(a, 0), arg(a, 0)))

    def static_resolve(interp_, this, args):
        value = arg(args, 0)
        if isinstance(value, JSPromise):
            return value
        promise = JSPromise(proto)
        resolve_promise(interp_, promise, value)
        return promise

    def static_reject(interp_, this, args):
        promise = JSPromise(proto)
        reject_promise(interp_, promise, arg(args, 0))
        return promise

    def combinator(mode):
        def native(interp_, this, args):
            values = list(interp_.iterate(arg(args, 0)))
            result = JSPromise(proto)
            slots = [UNDEFINED] * len(values)
            remaining = [len(values)]
            fn_proto = interp_.protos["Function"]

            def settled(index, value, ok):
                if result.state != JSPromise.PENDING:
                    return
                if mode == "race":
                    (resolve_promise if ok else reject_promise)(interp_, result, value)
                    return
                if mode == "all" and not ok:
                    reject_promise(interp_, result, value)
                    return
                if mode == "allSettled":
                    value = interp_.new_object({"status": "fulfilled" if ok else "rejected",
                                                "value" if ok else "reason": value})
                slots[index] = value
                remaining[0] -= 1
                if remaining[0] == 0:
                    resolve_promise(interp_, result, interp_.new_array(slots))

            if not values and mode != "race":
                resolve_promise(interp_, result, interp_.new_array([]))
            for index, value in enumerate(values):
                if isinstance(value, JSPromise):
                    _then(interp_, value,
                          NativeFunction(fn_proto, lambda i, t, a, n=index: settled(n, arg(a, 0), True)),
                          NativeFunction(fn_proto, lambda i, t, a, n=index: settled(n, arg(a, 0), False)))
                else:
                    settled(index, value, True)
            return result
        return native

    define(interp, ctor, "resolve", static_resolve)
    define(interp, ctor, "reject", static_reject)
    define(interp, ctor, "all", combinator("all"))
    define(interp, ctor, "allSettled", combinator("allSettled"))
    define(interp, ctor, "race", combinator("race"))


# ---- timers ----

def _install_timers(interp):
    target = interp.global_natives

    def schedule(interp_, this, args):
        handler = arg(args, 0)
        timer_id = interp_.next_timer_id()
        if isinstance(handler, str):
            handler = interp_.compile_function([], handler)
        if is_callable(handler):
            interp_.queue_callback(handler, list(args[2:]), timer_id=timer_id)
        return float(timer_id)

    def clear(interp_, this, args):
        value = arg(args, 0)
        if isinstance(value, float) and value == value:
            interp_.cancelled_timers.add(int(value))
        return UNDEFINED

    def microtask(interp_, this, args):
        interp_.queue_callback(_callback(interp_, arg(args, 0)), [])
        return UNDEFINED

    for name, fn in (("setTimeout", schedule), ("setInterval", schedule), ("setImmediate", schedule),
                     ("requestAnimationFrame", schedule), ("clearTimeout", clear), ("clearInterval", clear),
                     ("queueMicrotask", microtask)):
        interp.global_scope.declare(name, define(interp, target, name, fn))


# ---- eval, URI helpers, base64 ----

_URI_COMPONENT_SAFE = "-_.!~*'()"
_URI_SAFE = _URI_COMPONENT_SAFE + ";,/?:@&=+$#"


def _install_misc(interp):
    target = interp.global_natives

    def uri_encoder(safe):
        def native(interp_, this, args):
            try:
                return quote(interp_.to_string(arg(args, 0)), safe=safe, encoding="utf-8", errors="strict")
            except UnicodeEncodeError:
                interp_.throw_error("URIError", "URI malformed")
        return native

    def uri_decoder(keep):
        def native(interp_, this, args):
            text = interp_.to_string(arg(args, 0))
            try:
                decoded = unquote(text, encoding="utf-8", errors="strict")
            except UnicodeDecodeError:
                interp_.throw_error("URIError", "URI malformed")
            if keep:
                for ch in keep:
                    decoded = decoded.replace(ch, quote(ch, safe=""))
            return decoded
        return native

    def btoa(interp_, this, args):
        text = interp_.to_string(arg(args, 0))
        try:
            return base64.b64encode(text.encode("latin-1")).decode("ascii")
        except UnicodeEncodeError:
            interp_.throw_error("Error", "InvalidCharacterError: string contains characters outside Latin1")

    def atob(interp_, this, args):
        text = re.sub(r"\s", "", interp_.to_string(arg(args, 0)))
        try:
            return base64.b64decode(text + "=" * (-len(text) % 4), validate=True).decode("latin-1")
        except ValueError:
            interp_.throw_error("Error", "InvalidCharacterError: the string to be decoded is not correctly encoded")

    def is_nan(interp_, this, args):
        value = interp_.to_number(arg(args, 0))
        return value != value

    def is_finite(interp_, this, args):
        value = interp_.to_number(arg(args, 0))
        return value == value and value not in (INF, -INF)

    def eval_native(interp_, this, args):
        return interp_.run_eval(arg(args, 0), interp_.global_scope)

    for name, fn in (("encodeURIComponent", uri_encoder(_URI_COMPONENT_SAFE)),
                     ("encodeURI", uri_encoder(_URI_SAFE)),
                     ("decodeURIComponent", uri_decoder("")),
                     ("decodeURI", uri_decoder(";,/?:@&=+$#")),
                     ("btoa", btoa), ("atob", atob), ("isNaN", is_nan), ("isFinite", is_finite),
                     ("eval", eval_native)):
        interp.global_scope.declare(name, define(interp, target, name, fn))

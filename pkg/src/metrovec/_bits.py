"""Bit reinterpretation between float32 and 32-bit integer words in jitted code."""

from numba import types
from numba.extending import intrinsic


@intrinsic
def f32_as_i32(typingctx, value):
    if value != types.float32:
        return None

    def codegen(context, builder, sig, args):
        return builder.bitcast(args[0], context.get_value_type(types.int32))

    return types.int32(types.float32), codegen


@intrinsic
def i32_as_f32(typingctx, value):
    # wider integers are truncated to their low 32 bits first
    if not isinstance(value, types.Integer):
        return None

    def codegen(context, builder, sig, args):
        word = context.cast(builder, args[0], sig.args[0], types.int32)
        return builder.bitcast(word, context.get_value_type(types.float32))

    return types.float32(value), codegen

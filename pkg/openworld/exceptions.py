#
#     This file is part of openworld.
#
#     openworld -- online open world recognition
#     Copyright (C) 2024 openworld developers. All rights reserved.
#
#     openworld is free software; you can redistribute it and/or
#     modify it under the terms of the GNU Lesser General Public
#     License as published by the Free Software Foundation; either
#     version 3 of the License, or (at your option) any later version.
#
#     openworld is distributed in the hope that it will be useful,
#     but WITHOUT ANY WARRANTY; without even the implied warranty of
#     MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU
#     Lesser General Public License for more details.
#
#     You should have received a copy of the GNU Lesser General Public
#     License along with openworld; if not, write to the Free Software
#     Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA  02110-1301  USA
#
#

class OpenWorldError(Exception):
    """Root of all errors raised by openworld."""


class InvalidInputError(OpenWorldError, ValueError):
    """Argument of the wrong shape, unknown class id or out-of-range parameter."""


class EmptyModelError(OpenWorldError):
    """Query on a model that holds no class (or no ball) yet."""


class NumericalError(OpenWorldError, ArithmeticError):
    """Non-finite sample or update; the offending step is rejected."""


class ConfigError(OpenWorldError):
    """Inconsistent configuration.

    Parameters
    ----------
    violations : list of str
        Every violation that was found, not just the first one.
    """
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        OpenWorldError.__init__(self, "; ".join(self.violations))


class ParseError(OpenWorldError):
    """Malformed input file.

    Parameters
    ----------
    message : str
    path : str, optional
    line : int, optional
        1-based line number (text formats)
    offset : int, optional
        Byte offset (binary formats)
    """
    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append("line %d" % line)
        if offset is not None:
            where.append("byte offset %d" % offset)
        if where:
            message = "%s: %s" % (", ".join(where), message)
        OpenWorldError.__init__(self, message)

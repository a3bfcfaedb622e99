"""
Custom exceptions for fovea

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""


class FoveaException(Exception):

    def __init__(self, value, *args):
        if args:
            value = value % args
        self.value = value
        Exception.__init__(self, value)

    def __str__(self):
        return str(self.value)


class CX(FoveaException):
    pass


class FileNotFoundException(FoveaException):
    pass


class NotImplementedException(FoveaException):
    pass

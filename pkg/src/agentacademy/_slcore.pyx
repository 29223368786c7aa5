# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled SL tokenizer/printer. Mirrors the pure-Python codec in ``sl.py``."""

from cpython.unicode cimport Py_UNICODE_ISSPACE

cdef object _Atom = None
cdef object _Str = None
cdef object _Keyword = None
cdef object _SList = None
cdef object _set_atom = None
cdef object _set_str = None
cdef object _set_kw = None
cdef object _set_items = None
cdef object _Unbalanced = None
cdef object _Unterminated = None
cdef object _Empty = None
cdef object _Trailing = None
cdef object _SyntaxErr = None
cdef object _new = object.__new__


def bind(atom, string, keyword, slist, unbalanced, unterminated, empty, trailing, syntax_error):
    """Hand over the node and error classes defined in ``sl.py``."""
    global _Atom, _Str, _Keyword, _SList, _set_atom, _set_str, _set_kw, _set_items
    global _Unbalanced, _Unterminated, _Empty, _Trailing, _SyntaxErr
    _Atom, _Str, _Keyword, _SList = atom, string, keyword, slist
    _set_atom = atom.text.__set__
    _set_str = string.text.__set__
    _set_kw = keyword.name.__set__
    _set_items = slist.items.__set__
    _Unbalanced, _Unterminated, _Empty, _Trailing = unbalanced, unterminated, empty, trailing
    _SyntaxErr = syntax_error


cdef inline bint _is_space(Py_UCS4 c):
    return Py_UNICODE_ISSPACE(c)


cdef inline bint _is_delim(Py_UCS4 c):
    return c == u'(' or c == u')' or c == u'"' or _is_space(c)


cdef inline object _mk(cls, setter, value):
    node = _new(cls)
    setter(node, value)
    return node


cdef int _boff(unicode text, Py_ssize_t i):
    return len(text[:i].encode("utf-8")) + 1


def is_bare_text(unicode text):
    cdef Py_ssize_t i, n = len(text)
    if n == 0:
        return False
    for i in range(n):
        if _is_delim(text[i]):
            return False
    return True


def is_atom_text(unicode text):
    return len(text) > 0 and text[0] != u':' and is_bare_text(text)


def parse_sl(unicode text):
    cdef Py_ssize_t pos = 0, n = len(text), start, j
    cdef Py_UCS4 c
    cdef list stack = []
    cdef list chunk
    root = None
    while True:
        while pos < n and _is_space(text[pos]):
            pos += 1
        if pos >= n:
            if stack:
                raise _Unbalanced("unclosed list", _boff(text, n))
            if root is None:
                raise _Empty("empty input", _boff(text, n))
            return root
        c = text[pos]
        start = pos
        if root is not None:
            if c == u')':
                raise _Unbalanced("unexpected ')'", _boff(text, start))
            raise _Trailing("trailing content", _boff(text, start))
        if c == u'(':
            stack.append([])
            pos += 1
            continue
        if c == u')':
            if not stack:
                raise _Unbalanced("unexpected ')'", _boff(text, start))
            node = _mk(_SList, _set_items, tuple(stack.pop()))
            pos += 1
        elif c == u'"':
            pos += 1
            chunk = None
            j = pos
            while pos < n:
                c = text[pos]
                if c == u'\\':
                    if pos + 1 >= n:
                        pos = n
                        break
                    if chunk is None:
                        chunk = []
                    chunk.append(text[j:pos])
                    chunk.append(text[pos + 1])
                    pos += 2
                    j = pos
                    continue
                if c == u'"':
                    break
                pos += 1
            if pos >= n:
                raise _Unterminated("unterminated string", _boff(text, start))
            if chunk is None:
                body = text[j:pos]
            else:
                chunk.append(text[j:pos])
                body = u"".join(chunk)
            node = _mk(_Str, _set_str, body)
            pos += 1
        else:
            while pos < n and not _is_delim(text[pos]):
                pos += 1
            if c == u':':
                if pos - start == 1:
                    raise _SyntaxErr("empty keyword", _boff(text, start))
                node = _mk(_Keyword, _set_kw, text[start + 1:pos])
            else:
                node = _mk(_Atom, _set_atom, text[start:pos])
        if stack:
            (<list>stack[len(stack) - 1]).append(node)
        else:
            root = node


cdef unicode _quote(unicode text):
    return u'"' + text.replace(u"\\", u"\\\\").replace(u'"', u'\\"') + u'"'


cdef void _emit(object node, list out) except *:
    t = type(node)
    cdef bint first
    if t is _Atom:
        out.append(node.text)
    elif t is _SList:
        out.append(u"(")
        first = True
        for child in node.items:
            if not first:
                out.append(u" ")
            first = False
            _emit(child, out)
        out.append(u")")
    elif t is _Str:
        out.append(_quote(node.text))
    elif t is _Keyword:
        out.append(u":" + node.name)
    else:
        raise TypeError(f"not an SL node: {node!r}")


def print_sl(node):
    cdef list out = []
    _emit(node, out)
    return u"".join(out)

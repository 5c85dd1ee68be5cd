"""Rendering of plain-text artifacts.

Templates are Jinja2 with ``@@`` line statements and two filters for the
numbers a summary shows::

    @@ for row in rows
    {{ row.response }} {{ row.value|value }} {{ row.rve|percent }}
    @@ endfor

Undefined names are errors, so a template never silently drops a column.
"""

import os.path

import jinja2

from occsearch import output


def format_value(value):
    return "{:.4f}".format(value)


def format_percent(value):
    return "{:.2f}%".format(value)


FILTERS = {"value": format_value, "percent": format_percent}


class TemplateEngine(object):
    """Abstract templating wrapper class."""

    @classmethod
    def get(cls, enginename, search_path=None):
        if enginename.lower() == "jinja2":
            return Jinja2Engine(search_path)
        raise NotImplementedError("template engine not known", enginename)

    def template(self, sourcefile, args):
        """Render the template file `sourcefile` with `args`."""
        raise NotImplementedError

    def expand(self, templatestr, args):
        raise NotImplementedError


class Jinja2Engine(TemplateEngine):
    def __init__(self, search_path=None):
        loader = None
        if search_path is not None:
            loader = jinja2.FileSystemLoader(search_path)
        self.env = jinja2.Environment(
            loader=loader,
            line_statement_prefix="@@",
            keep_trailing_newline=True,
            undefined=jinja2.StrictUndefined,
        )
        self.env.filters.update(FILTERS)

    def template(self, sourcefile, args):
        if self.env.loader is not None and not os.path.isabs(sourcefile):
            output.annotate("rendering {}".format(sourcefile), debug=True)
            return self.env.get_template(sourcefile).render(**args)
        with open(sourcefile) as f:
            return self.expand(f.read(), args, identifier=sourcefile)

    def expand(self, templatestr, args, identifier="<template>"):
        output.annotate("rendering {}".format(identifier), debug=True)
        return self.env.from_string(templatestr).render(**args)

"""Paper details page for a tiny conference system.

No access control yet: every authenticated user sees every field of every
paper.
"""

PAPER_FIELDS = ("pdf", "status", "authors", "reviewers", "reviews")


def can_view(user, paper, field):
    # TODO(access-control): restrict which users see which fields.
    return True


def paper_details(user, paper):
    return {field: paper.get(field) for field in PAPER_FIELDS if can_view(user, paper, field)}

from .exceptions import ZeroReference


def rate_of_descent(ap_ref, ap):
    """Relative AP drop (ap_ref - ap) / ap_ref."""
    if ap_ref <= 0:
        raise ZeroReference()
    return (ap_ref - ap) / ap_ref


def descent_table(reference, measured):
    """rate_of_descent for every key present in both mappings, in reference order."""
    table = {}
    for key, ap_ref in reference.items():
        if key not in measured or measured[key] is None or ap_ref is None:
            continue
        if ap_ref <= 0:
            raise ZeroReference(key)
        table[key] = rate_of_descent(ap_ref, measured[key])
    return table


def format_descent(table):
    return ''.join(f"{key}: {100 * rate:.1f}%\n" for key, rate in table.items())

from paralleleye.exceptions import ParallelEyeError


class MalformedXml(ParallelEyeError):
    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class DanglingNodeRef(ParallelEyeError):
    def __init__(self, node_id, way_id=None):
        super().__init__(f"way {way_id} references unknown node {node_id}")
        self.node_id = node_id
        self.way_id = way_id


class DegenerateGeometry(ParallelEyeError):
    def __init__(self, way_id, reason):
        super().__init__(f"way {way_id}: {reason}")
        self.way_id = way_id
        self.reason = reason


class LayoutError(ParallelEyeError):
    pass

from paralleleye.exceptions import ParallelEyeError


class EmptyMask(ParallelEyeError):
    pass


class FullyOutOfView(ParallelEyeError):
    def __init__(self, instance_id):
        super().__init__(f"instance {instance_id} has no pixels even when rendered alone")
        self.instance_id = instance_id


class MissingPreviousPose(ParallelEyeError):
    def __init__(self, entity_id):
        super().__init__(f"entity {entity_id} does not exist in the previous frame")
        self.entity_id = entity_id
